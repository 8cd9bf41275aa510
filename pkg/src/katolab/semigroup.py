"""Heat and Schrödinger semigroups on a discrete surface and Kato-type constants.

The semi-discrete equation is ``M du/dt = -K u + M V u`` with lumped mass
``M`` and stiffness ``K``; with ``V = 0`` it is the heat equation with
natural (Neumann) boundary conditions.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .geometry.mesh import DiscreteManifold
from .geometry.metric import distances_from
from .outcome import CheckOutcome, leq

SCHEMES = ("backward_euler", "crank_nicolson")
_LU_CACHE_SIZE = 24


@dataclass(frozen=True)
class PropagationPlan:
    """Time-stepping parameters.

    Parameters
    ----------
    scheme : str
        ``"crank_nicolson"`` (default) or ``"backward_euler"``.
    steps_per_unit : int
        Steps per unit time; the step is also capped at ``t / min_steps``.
    min_steps : int
        Minimum number of steps for a single propagation.
    positivity_required : bool
        Restrict the step so that the scheme maps nonnegative data to
        nonnegative data. Backward Euler is unconditionally positive for
        ``V = 0``; Crank-Nicolson is positive when ``dt <= 2 m_i / K_ii``.
    startup_substeps : int
        Crank-Nicolson starts with this many backward-Euler substeps covering
        the first step, which damps the stiff modes of rough data.
    extrapolate : bool
        Combine runs with step ``dt`` and ``dt/2`` to cancel the leading
        error term (ignored when ``positivity_required``). The combination
        is still exactly conservative.
    """

    scheme: str = "crank_nicolson"
    steps_per_unit: int = 400
    min_steps: int = 400
    positivity_required: bool = False
    startup_substeps: int = 4
    extrapolate: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.steps_per_unit < 1 or self.min_steps < 1 or self.startup_substeps < 1:
            raise ValueError("step counts must be >= 1")


DEFAULT_PLAN = PropagationPlan()
POSITIVE_PLAN = PropagationPlan(positivity_required=True)


def _vkey(V):
    if V is None:
        return None
    return hashlib.sha1(np.ascontiguousarray(V, dtype=float).tobytes()).hexdigest()


def _check_field(mesh, f, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.N:
        raise ValueError(f"{name} has length {f.shape[0]}, mesh has {mesh.N} vertices")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} has non-finite entries")
    return f


def _check_potential(mesh, V):
    if V is None:
        return None
    V = _check_field(mesh, V, "potential")
    if V.ndim != 1:
        raise ValueError("potential must be a vector")
    if np.any(V < 0):
        raise ValueError("potential must be nonnegative")
    return V if np.any(V != 0) else None


class Propagator:
    """Time stepper for ``M u' = -(K - M V) u`` with cached factorizations."""

    def __init__(self, mesh: DiscreteManifold, V=None):
        self.mesh = mesh
        self.V = _check_potential(mesh, V)
        self.m = mesh.mass
        A = mesh.stiffness
        if self.V is not None:
            A = (A - sps.diags(self.m * self.V)).tocsr()
        self.A = A
        self._key = _vkey(self.V)
        self._lus = mesh._cache.setdefault("lu", OrderedDict())

    def positive_dt(self) -> float:
        """Largest step for which one Crank-Nicolson step is positivity preserving."""
        d = self.A.diagonal()
        with np.errstate(divide="ignore"):
            lim = np.where(d > 0, 2.0 * self.m / np.where(d > 0, d, 1.0), np.inf)
        dt = float(lim.min())
        if self.V is not None:
            # diagonal dominance of the implicit matrix; startup substeps need half of it
            dt = min(dt, 0.999 * 2.0 / float(self.V.max()))
        return dt

    def _lu(self, kind, dt):
        key = (self._key, kind, dt)
        lu = self._lus.get(key)
        if lu is None:
            c = dt if kind == "be" else 0.5 * dt
            lhs = (sps.diags(self.m) + c * self.A).tocsc()
            lu = spla.splu(lhs)
            self._lus[key] = lu
            while len(self._lus) > _LU_CACHE_SIZE:
                self._lus.popitem(last=False)
        return lu

    def _be(self, u, dt):
        return self._lu("be", dt).solve(self._mul_m(u))

    def _cn(self, u, dt):
        rhs = self._mul_m(u) - 0.5 * dt * (self.A @ u)
        return self._lu("cn", dt).solve(rhs)

    def _mul_m(self, u):
        return self.m[:, None] * u if u.ndim == 2 else self.m * u

    def step_size(self, t_total, plan):
        dt = min(1.0 / plan.steps_per_unit, t_total / plan.min_steps)
        if plan.positivity_required:
            if plan.scheme == "crank_nicolson":
                dt = min(dt, self.positive_dt())
            elif self.V is not None:
                dt = min(dt, 0.999 / float(self.V.max()))
        return dt

    def run(self, u0, times, plan=DEFAULT_PLAN, callback=None):
        """States at each time in ``times`` (strictly increasing, > 0).

        ``callback(k, t, u)`` is called after every step if given.
        Returns an array of shape ``(len(times),) + u0.shape``.
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size == 0:
            raise ValueError("no output times")
        if times[0] <= 0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be positive and strictly increasing")
        u = np.array(u0, dtype=float, copy=True)
        if not np.all(np.isfinite(u)):
            raise ValueError("initial data has non-finite entries")
        dt_target = self.step_size(times[-1], plan)
        if plan.extrapolate and not plan.positivity_required:
            p = 2 if plan.scheme == "crank_nicolson" else 1
            coarse = self._run(u, times, plan, dt_target, None)
            fine = self._run(u, times, plan, 0.5 * dt_target, callback)
            return (2 ** p * fine - coarse) / (2 ** p - 1)
        return self._run(u, times, plan, dt_target, callback)

    def _run(self, u, times, plan, dt_target, callback):
        out = np.empty((times.size,) + u.shape)
        t_prev, k = 0.0, 0
        t_cur = 0.0
        first = True
        for i, t in enumerate(times):
            span = t - t_prev
            n = max(1, int(math.ceil(span / dt_target * (1 - 1e-12))))
            dt = span / n
            for _ in range(n):
                if plan.scheme == "backward_euler":
                    u = self._be(u, dt)
                elif first:
                    sub = dt / plan.startup_substeps
                    for _ in range(plan.startup_substeps):
                        u = self._be(u, sub)
                else:
                    u = self._cn(u, dt)
                first = False
                k += 1
                t_cur += dt
                if callback is not None:
                    callback(k, t_cur, u)
            out[i] = u
            t_prev = t
        return out


def _times(t):
    t = float(t)
    if not t > 0:
        raise ValueError("t must be positive")
    return t


def heat_apply(mesh: DiscreteManifold, f, t, plan: PropagationPlan = DEFAULT_PLAN):
    """``P_t f``: the heat equation advanced to time ``t``.

    ``f`` may be a vector or an ``(N, k)`` array of columns.
    """
    f = _check_field(mesh, f)
    return Propagator(mesh).run(f, [_times(t)], plan)[0]


def heat_series(mesh, f, times, plan=DEFAULT_PLAN, V=None):
    """Snapshots of the heat (or Schrödinger) flow at ``times``."""
    f = _check_field(mesh, f)
    return Propagator(mesh, V).run(f, times, plan)


def delta(mesh: DiscreteManifold, x) -> np.ndarray:
    """Discrete delta at ``x`` (value ``1/m_x``); a matrix of columns for a list."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    d = np.zeros((mesh.N, x.size))
    d[x, np.arange(x.size)] = 1.0 / mesh.mass[x]
    return d


def heat_kernel_column(mesh: DiscreteManifold, x, t, plan: PropagationPlan = DEFAULT_PLAN):
    """``p_t(x, .)``; with a list of vertices, an ``(N, k)`` array of columns."""
    t = _times(t)
    scalar = np.ndim(x) == 0
    u = Propagator(mesh).run(delta(mesh, x), [t], plan)[0]
    return u[:, 0] if scalar else u


def heat_kernel_series(mesh, x, times, plan=DEFAULT_PLAN):
    """``p_t(x_j, .)`` for each time; shape ``(len(times), N, len(x))``."""
    return Propagator(mesh).run(delta(mesh, x), times, plan)


def schrodinger_apply(mesh: DiscreteManifold, V, f, t, plan: PropagationPlan = DEFAULT_PLAN):
    """``e^{t(Delta + V)} f`` for a nonnegative potential ``V``."""
    f = _check_field(mesh, f)
    return Propagator(mesh, V).run(f, [_times(t)], plan)[0]


# -- Kato constants -----------------------------------------------------------

def _pinned_laplace_solver(mesh):
    """Solver for ``K u = r`` with ``1^T r = 0``, returning the mass-mean-zero solution."""
    sol = mesh._cache.get("pinned")
    if sol is None:
        K = mesh.stiffness.tocsc()
        lu = spla.splu(K[1:, 1:].tocsc())

        def sol(r):
            u = np.zeros_like(r)
            u[1:] = lu.solve(np.ascontiguousarray(r[1:]))
            return u - (mesh.mass @ u) / mesh.volume
        mesh._cache["pinned"] = sol
    return sol


def time_integral(mesh, V, T, plan=DEFAULT_PLAN):
    """``int_0^T P_t V dt`` per vertex.

    Uses ``L int_0^T e^{-tL} V dt = V - e^{-TL} V`` with ``L = M^{-1} K``:
    the mean of ``V`` contributes ``T * mean``, the rest one propagation to
    ``T`` and one Poisson solve. Errors of the propagation are damped by
    ``e^{-lambda_1 T}``. ``V`` may be (N,) or (N, k) for k potentials at once.
    """
    V = _check_field(mesh, V)
    T = _times(T)
    vbar = (mesh.mass @ V) / mesh.volume
    V0 = V - vbar
    if not np.any(V0):
        return np.broadcast_to(vbar * T, V.shape).copy()
    PT = Propagator(mesh).run(V0, [T], plan)[0]
    PT -= (mesh.mass @ PT) / mesh.volume  # remove roundoff drift of the mean
    m = mesh.mass[:, None] if V.ndim == 2 else mesh.mass
    w = _pinned_laplace_solver(mesh)(m * (V0 - PT))
    return vbar * T + w


def time_integral_trapezoid(mesh, V, T, plan=DEFAULT_PLAN, rtol=1e-6, max_doublings=4):
    """Trapezoid rule on the propagation grid with step halving.

    Returns ``(integral, info)``; the integral is the Richardson value
    ``(4 I_{2n} - I_n) / 3`` of the last two levels.
    """
    V = _check_field(mesh, V)
    T = _times(T)
    prop = Propagator(mesh)
    n = max(plan.min_steps, int(math.ceil(plan.steps_per_unit * T)))
    prev = None
    info = {"levels": []}
    for _ in range(max_doublings + 1):
        times = T * np.arange(1, n + 1) / n
        sub = replace(plan, steps_per_unit=max(1, int(math.ceil(n / T))), min_steps=n,
                      extrapolate=False)
        U = prop.run(V, times, sub)
        I = (T / n) * (0.5 * V + U[:-1].sum(axis=0) + 0.5 * U[-1])
        info["levels"].append(n)
        if prev is not None:
            rich = (4.0 * I - prev) / 3.0
            change = np.max(np.abs(I - prev)) / max(np.max(np.abs(I)), 1e-300)
            info["rel_change"] = float(change)
            if change < rtol:
                return rich, info
        prev = I
        n *= 2
    info["converged"] = False
    return (4.0 * I - prev) / 3.0, info


def kappa(mesh: DiscreteManifold, V, T, plan: PropagationPlan = DEFAULT_PLAN, method="exact"):
    """``kappa_T(V) = || int_0^T P_t V dt ||_inf`` (Neumann semigroup with boundary).

    ``method`` is ``"exact"`` (Poisson identity, default) or ``"trapezoid"``.
    """
    V = _check_field(mesh, V)
    if np.any(V < 0):
        raise ValueError("potential must be nonnegative")
    if not np.any(V):
        return 0.0
    if method == "exact":
        I = time_integral(mesh, V, T, plan)
    elif method == "trapezoid":
        I, _ = time_integral_trapezoid(mesh, V, T, plan)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.max(np.abs(I)))


mu = kappa  # the Neumann Kato constant is kappa on a mesh with boundary


def resolvent(mesh: DiscreteManifold, V, alpha):
    """``(-Delta + alpha)^{-1} V``: solves ``(K + alpha M) u = M V``."""
    V = _check_field(mesh, V)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    key = ("resolvent", float(alpha))
    lu = mesh._cache.get(key)
    if lu is None:
        lu = spla.splu((mesh.stiffness + alpha * sps.diags(mesh.mass)).tocsc())
        mesh._cache[key] = lu
    rhs = mesh.mass[:, None] * V if V.ndim == 2 else mesh.mass * V
    return lu.solve(rhs)


def c_alpha(mesh: DiscreteManifold, V, alpha) -> float:
    """``c_alpha(V) = || (-Delta + alpha)^{-1} V ||_inf``."""
    V = _check_field(mesh, V)
    if np.any(V < 0):
        raise ValueError("potential must be nonnegative")
    if not np.any(V):
        return 0.0
    return float(np.max(np.abs(resolvent(mesh, V, alpha))))


def kappa_many(mesh, Vs, T, plan=DEFAULT_PLAN) -> np.ndarray:
    """``kappa_T`` of several potentials with one batched propagation."""
    Vs = np.column_stack([np.asarray(V, dtype=float) for V in Vs])
    if np.any(Vs < 0):
        raise ValueError("potential must be nonnegative")
    out = np.zeros(Vs.shape[1])
    nz = np.any(Vs != 0, axis=0)
    if np.any(nz):
        out[nz] = np.max(np.abs(time_integral(mesh, Vs[:, nz], T, plan)), axis=0)
    return out


def kappa_c_bridge(mesh, V, alpha, beta, plan=DEFAULT_PLAN, tolerance=1e-6,
                   kappa_beta=None) -> CheckOutcome:
    """Both sides of ``(1 - e^{-ab}) c_a <= kappa_b <= e^{ab} c_a``.

    The outcome's lhs/rhs describe the tighter of the two inequalities; the
    other one is in ``details``. ``kappa_beta`` may be supplied if already known.
    """
    k = kappa(mesh, V, beta, plan) if kappa_beta is None else float(kappa_beta)
    c = c_alpha(mesh, V, alpha)
    lower = (1.0 - math.exp(-alpha * beta)) * c
    upper = math.exp(alpha * beta) * c
    lo = leq("kappa_c_bridge.lower", lower, k, abs_tol=tolerance)
    hi = leq("kappa_c_bridge.upper", k, upper, abs_tol=tolerance)
    worst = lo if lo.margin <= hi.margin else hi
    status = "pass" if (not lo.failed and not hi.failed) else "fail"
    return CheckOutcome(
        "kappa_c_bridge", worst.lhs, worst.rhs, status, tolerance=tolerance,
        margin=min(lo.margin, hi.margin), digest=mesh.digest,
        anchor="(1-exp(-a b)) c_a(V) <= kappa_b(V) <= exp(a b) c_a(V)",
        details={"kappa_beta": k, "c_alpha": c, "lower": lower, "upper": upper,
                 "alpha": float(alpha), "beta": float(beta)})


@dataclass(frozen=True)
class KatoReport:
    kappa_T: float
    c_alpha: float
    T: float
    alpha: float
    mu_T: float | None = None
    scheme: str = ""
    steps_per_unit: int = 0
    method: str = "exact"

    def to_record(self) -> str:
        rows = [(k, getattr(self, k)) for k in self.__dataclass_fields__]
        return "".join(f"{k} = {v!r}\n" for k, v in rows)


def kato_report(mesh, V, T, alpha, plan=DEFAULT_PLAN, method="exact") -> KatoReport:
    k = kappa(mesh, V, T, plan, method=method)
    c = c_alpha(mesh, V, alpha)
    return KatoReport(k, c, float(T), float(alpha), mu_T=None if mesh.closed else k,
                      scheme=plan.scheme, steps_per_unit=plan.steps_per_unit, method=method)


# -- geometric integral condition ------------------------------------------------

def _ball_means(mesh, rho, x):
    d = distances_from(mesh, [x])[0]
    idx = np.argsort(d, kind="stable")
    ds = d[idx]
    cm = np.cumsum(mesh.mass[idx])
    cr = np.cumsum(mesh.mass[idx] * rho[idx])
    return ds, cr / cm


def geometric_kato(mesh: DiscreteManifold, rho_minus, x, D, n_radii=256, exact=False) -> float:
    """``int_0^D r * (mean of rho_minus over B(x, r)) dr``.

    Trapezoid rule on ``n_radii`` uniform intervals; ``exact=True`` integrates
    the piecewise-constant ball mean exactly instead.
    """
    rho = _check_field(mesh, rho_minus)
    if np.any(rho < 0):
        raise ValueError("rho_minus must be nonnegative")
    D = float(D)
    if not D > 0:
        raise ValueError("D must be positive")
    ds, mean = _ball_means(mesh, rho, x)
    if exact:
        # mean[k] applies on [ds[k], ds[k+1]); beyond the last distance it stays constant
        edges = np.clip(np.append(ds, np.inf), 0.0, D)
        return float(np.sum(mean * 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2)))
    r = np.linspace(0.0, D, n_radii + 1)
    k = np.searchsorted(ds, r, side="right") - 1
    g = r * mean[np.maximum(k, 0)]
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(r)))


# -- J functions -----------------------------------------------------------------

W_FLOOR = 1e-300


@dataclass
class JSolution:
    times: np.ndarray
    J: np.ndarray
    w: np.ndarray
    c: float
    mu_T: float
    floored: bool
    hypothesis_ok: bool


def solve_J_parabolic(mesh: DiscreteManifold, rho_minus, c, T, plan: PropagationPlan = POSITIVE_PLAN,
                      times=None) -> JSolution:
    """``J = w^{-1/(c-1)}`` with ``w = e^{t(Delta + V)} 1`` and ``V = 2(c-1) rho_minus``.

    ``times`` defaults to 50 uniform times in ``(0, T]``.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    rho = _check_field(mesh, rho_minus)
    T = _times(T)
    times = T * np.arange(1, 51) / 50 if times is None else np.asarray(times, dtype=float)
    mu_T = kappa(mesh, rho, T)
    ok = mu_T < 1.0 / (2.0 * (c - 1.0))
    if not ok:
        warnings.warn(f"Kato constant {mu_T:.3g} is not below 1/(2(c-1)) = {1 / (2 * (c - 1)):.3g}",
                      RuntimeWarning, stacklevel=2)
    V = 2.0 * (c - 1.0) * rho
    w = Propagator(mesh, V).run(np.ones(mesh.N), times, plan)
    floored = bool(np.any(w < W_FLOOR))
    J = np.maximum(w, W_FLOOR) ** (-1.0 / (c - 1.0))
    return JSolution(times, J, w, float(c), mu_T, floored, bool(ok))


def solve_J_elliptic(mesh: DiscreteManifold, rho_minus, tau):
    """``J = (w / wbar)^{-1/(tau-1)}`` from the ground state with ``V = 2(tau-1) rho_minus``.

    Returns ``(J, ground_state)``.
    """
    from .spectrum import ground_state_schrodinger

    if not tau > 1:
        raise ValueError("tau must exceed 1")
    rho = _check_field(mesh, rho_minus)
    gs = ground_state_schrodinger(mesh, 2.0 * (tau - 1.0) * rho)
    if not gs.w_bar > 0:
        raise RuntimeError("ground state has nonpositive mean")
    w2 = np.maximum(gs.w / gs.w_bar, W_FLOOR)
    return w2 ** (-1.0 / (tau - 1.0)), gs


def write_time_series(path, times, values):
    """CSV with columns ``t, vertex_id, value``."""
    from .geometry.meshio import atomic_write_text

    values = np.asarray(values, dtype=float)
    lines = ["t,vertex_id,value"]
    for t, row in zip(np.asarray(times, dtype=float).tolist(), values):
        lines.extend(f"{t!r},{i},{v!r}" for i, v in enumerate(row.tolist()))
    atomic_write_text(path, "\n".join(lines) + "\n")
