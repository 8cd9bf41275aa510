"""Explicit constants of the boundary gradient estimate and its consequences.

Rational parts are evaluated in exact arithmetic (:class:`fractions.Fraction`)
and converted to float once, so repeated evaluation is bit-identical and the
convex-case values come out as exact fractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from ..spectrum import c_n_nu


def _q(x) -> Fraction:
    """Exact rational from an int, Fraction or float (floats are exact binary)."""
    return x if isinstance(x, Fraction) else Fraction(x)


def li_yau_nu(n) -> float:
    """Volume-growth exponent ``e^2 n``."""
    return math.e ** 2 * n


@dataclass(frozen=True)
class NeumannConstants:
    """Constants of the Neumann Li-Yau estimate for given ``(n, H, R, T, mu_T)``.

    ``C1, C2, threshold`` are the values used in assertions: the convex-case
    constants when ``H == 0`` and the general formulas otherwise, where ``C2``
    is the literal ``(1 + H^2)`` variant. ``C2_squared`` holds the
    ``(1 + H)^2`` variant that matches the neighbouring formulas.
    """

    n: int
    H: float
    R: float
    T: float
    mu_T: float
    c1: float
    C1_general: float
    C1: float
    C2: float
    C2_squared: float
    threshold: float
    threshold_exact: Fraction
    C2_exact: Fraction
    nu: float
    alpha: Fraction
    beta: Fraction
    c_J: Fraction
    convex: bool
    extra: dict = field(default_factory=dict)

    @property
    def hypothesis_ok(self) -> bool:
        return self.mu_T < self.threshold

    @property
    def J_floor(self) -> float:
        """Lower end ``e^{-16 mu_T}`` of the bracket for ``J``."""
        return math.exp(-16.0 * self.mu_T)

    def as_dict(self) -> dict:
        keys = ("n", "H", "R", "T", "mu_T", "c1", "C1_general", "C1", "C2", "C2_squared",
                "threshold", "nu", "convex")
        out = {k: getattr(self, k) for k in keys}
        out.update(alpha=float(self.alpha), beta=float(self.beta), c_J=float(self.c_J))
        return out


def neumann_constants(n, H, R, T=1.0, mu_T=0.0) -> NeumannConstants:
    """Evaluate ``c1, C1, C2``, the Kato threshold and the ``J`` exponent.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    H : float
        Lower bound ``II >= -H`` for the second fundamental form.
    R : float
        Rolling-ball radius.
    T, mu_T : float
        Time horizon and the Neumann Kato constant of ``rho_minus``.
    """
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if not H >= 0:
        raise ValueError("H must be nonnegative")
    if not R > 0:
        raise ValueError("R must be positive")
    n = int(n)
    Hq, Rq = _q(H), _q(R)
    n2 = n * n
    a = (1 + Hq) ** 2
    s = 4 * (1 + 2 * n2 * a)
    c1 = 128 * n2 * Hq * Hq / (Rq * Rq) + Hq / (2 * Rq * (1 + Hq) * (1 + 2 * n2 * a)) \
        + 16 * Hq * (1 + Hq) / Rq
    C1_general = float(4 * n2 * a) * math.sqrt(float(s / (s - 1))) * float(c1)
    tail = 1 - Fraction(1, 1) / (4 + 8 * n2 * a)
    C2_lit = tail / (2 * n2 * (1 + Hq * Hq))
    C2_sq = tail / (2 * n2 * a)
    thr = 1 / (2 * ((3 + 2 * a) * (4 + 8 * n2 * a) - 1))
    alpha = 1 / (2 * a)
    beta = 1 / (4 + 8 * n2 * a)
    c_J = (3 + 1 / alpha) / beta
    convex = Hq == 0
    extra = {}
    if convex:
        sc = Fraction(4 * (1 + 2 * n2))
        C1_cvx = 4 * n2 * math.sqrt(float(sc / (sc - 1)))
        C2_cvx = (1 - Fraction(1, 4 + 8 * n2)) / (2 * n2)
        thr_cvx = Fraction(1, 38 + 80 * n2)
        extra = {"C1_convex": C1_cvx, "C2_convex": C2_cvx, "threshold_convex": thr_cvx}
        C1, C2q, thr_used = C1_cvx, C2_cvx, thr_cvx
    else:
        C1, C2q, thr_used = C1_general, C2_lit, thr
    return NeumannConstants(
        n=n, H=float(H), R=float(R), T=float(T), mu_T=float(mu_T), c1=float(c1),
        C1_general=C1_general, C1=C1, C2=float(C2q), C2_squared=float(C2_sq),
        threshold=float(thr_used), threshold_exact=thr_used, C2_exact=C2q,
        nu=li_yau_nu(n), alpha=alpha, beta=beta, c_J=c_J, convex=convex, extra=extra)


@dataclass(frozen=True)
class AuxJConstants:
    C: float
    tau1: float
    tau2: float
    tau0: float
    gate: float


def aux_J_constants(n, D, Lambda, delta, c_n=1.0) -> AuxJConstants:
    """``C_{D,Lambda}``, ``tau_1``, ``tau_2``, ``tau_0`` and the Kato gate
    ``1/2 (tau_0 - 1)^{-3}`` for the auxiliary function ``J``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    nu = li_yau_nu(n)
    r = math.sqrt(8 * n)
    C = 4.0 * c_n_nu(nu, c_n) * r / (r - 2.0) * D ** (-nu / 2.0) * Lambda ** -0.5
    q = C * C / (D * D)
    tau1 = max(r + 1.0, 2.0 * (1.0 + 4.0 * q))
    tau2 = 1.0 + max(8.0 * q, (162.0 * q / (delta * delta)) ** (1.0 / 3.0))
    tau0 = max(tau1, tau2)
    return AuxJConstants(C, tau1, tau2, tau0, 0.5 * (tau0 - 1.0) ** -3)
