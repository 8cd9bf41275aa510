"""Inequalities on closed surfaces: eigenvalue bounds, Li-Yau, Harnack,
heat-kernel and volume constants, the auxiliary ``J`` and the semigroup norm.
"""
from __future__ import annotations

import math

import numpy as np

from .. import oracles
from .. import semigroup as sg
from ..fields import time_derivative, vertex_gradient_sq
from ..geometry.curvature import ricci_lower_field, rho_minus as _neg_part
from ..geometry.metric import (ball_volume, diameter, diameter_info, distances_from,
                               doubling_ratio, sampling_plan)
from ..outcome import CALIBRATED, FAIL, CheckOutcome, leq, not_met
from ..spectrum import lambda_1, p_mean_norm, rayleigh_quotient
from .constants import aux_J_constants, li_yau_nu

# Coarser stepping for empirical constants that need no pointwise accuracy.
FAST_PLAN = sg.PropagationPlan(steps_per_unit=100, min_steps=100, extrapolate=False)
DEFAULT_T_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)


def curvature_deficit(mesh, rho_minus=None) -> np.ndarray:
    """``rho_minus`` from the argument or from the mesh's analytic spec."""
    if rho_minus is not None:
        r = np.asarray(rho_minus, dtype=float)
        if r.shape != (mesh.N,) or np.any(r < 0):
            raise ValueError("rho_minus must be a nonnegative field on the mesh")
        return r
    if mesh.spec is None:
        raise ValueError("mesh has no spec; pass rho_minus explicitly")
    return _neg_part(ricci_lower_field(mesh.spec, mesh))


def _require_closed(mesh):
    if not mesh.closed:
        raise ValueError("this check needs a closed mesh")


def seed_vertices(mesh, count, seed):
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(mesh.N, size=min(count, mesh.N), replace=False))


def _finite(name, value, **kw) -> CheckOutcome:
    """Empirical constant: calibrated when finite and positive."""
    ok = math.isfinite(value) and value > 0
    return CheckOutcome(name, value, value, CALIBRATED if ok else FAIL,
                        margin=0.0 if ok else -math.inf, **kw)


def _gate(mesh, rho, T):
    """``kappa_T(rho_minus)`` and whether it is at most ``1/(16 n)``."""
    k = sg.kappa(mesh, rho, T) if np.any(rho) else 0.0
    return k, k <= 1.0 / (16 * mesh.n)


# -- eigenvalue bounds -----------------------------------------------------------

def check_zhong_yang(mesh, rho_minus=None, alpha_target=0.9, kappa_gate=1e-3, tolerance=0.0,
                     seed=0) -> CheckOutcome:
    """``lambda_1 D^2 / pi^2 >= alpha_target`` whenever ``kappa_{D^2}(rho_minus) <= kappa_gate``."""
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    D = diameter(mesh)
    k = sg.kappa(mesh, rho, D * D) if np.any(rho) else 0.0
    lam = lambda_1(mesh, seed=seed)
    ratio = lam * D * D / math.pi ** 2
    info = dict(kappa=k, lambda_1=lam, D=D, ratio=ratio, kappa_gate=kappa_gate)
    anchor = "lambda_1 >= alpha pi^2 / D^2 under small kappa_{D^2}(rho_-)"
    if k > kappa_gate:
        return not_met("zhong_yang", alpha_target, ratio, anchor=anchor, details=info,
                       digest=mesh.digest, seed=seed)
    return leq("zhong_yang", alpha_target, ratio, tolerance=tolerance, anchor=anchor,
               details=info, digest=mesh.digest, seed=seed, units="dimensionless")


def cutoff(mesh, x, R) -> np.ndarray:
    """1 on ``B(x, R/2)``, linear in distance down to 0 at radius ``R``."""
    d = distances_from(mesh, [x])[0]
    return np.clip(2.0 - 2.0 * d / R, 0.0, 1.0)


def disjoint_radius(mesh, x, y, R, max_shrink=2.0):
    """Largest ``R' <= R`` (down to ``R - max_shrink * h``) whose open vertex
    balls around ``x`` and ``y`` share no vertex, or None."""
    dx, dy = distances_from(mesh, [x, y])
    # a vertex lies in both balls of radius r iff max(dx, dy) < r
    r_ok = min(R, float(np.maximum(dx, dy).min()))
    if r_ok < R - max_shrink * mesh.mean_edge:
        return None
    return r_ok


def check_cheng(mesh, rho_minus=None, seed=0) -> CheckOutcome:
    """``lambda_1 <= max_c (4/R^2) V(c, R) / V(c, R/2)`` at ``R = D/2`` for a diametral pair.

    Two disjoint balls carry the cutoff test functions; a combination
    orthogonal to constants gives the upper bound for ``lambda_1``.
    """
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    info = diameter_info(mesh)
    D = info.value
    x, y = info.pair
    k, ok = _gate(mesh, rho, D * D)
    anchor = "lambda_1 <= (4/R^2) V(x,R)/V(x,R/2), R = D/2, two disjoint balls"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor, units="1/length^2")
    if not ok:
        return not_met("cheng", details=dict(kappa=k, gate=1.0 / (16 * mesh.n)), **common)
    R = disjoint_radius(mesh, x, y, 0.5 * D)
    if R is None:
        raise ValueError(f"no disjoint balls of radius ~{0.5 * D:.4g} around vertices {x}, {y}; "
                         "refine the mesh")
    bounds, quotients, phis = [], [], []
    for c in (x, y):
        vR, vh = ball_volume(mesh, c, R), ball_volume(mesh, c, 0.5 * R)
        bounds.append(4.0 / R ** 2 * vR / vh)
        phi = cutoff(mesh, c, R)
        phis.append(phi)
        quotients.append(rayleigh_quotient(mesh, phi))
    a = mesh.mass @ phis[0]
    b = mesh.mass @ phis[1]
    courant = rayleigh_quotient(mesh, phis[0] / a - phis[1] / b)
    lam = lambda_1(mesh, seed=seed)
    nu = li_yau_nu(mesh.n)
    c_d = doubling_ratio(mesh, nu, sampling_plan(mesh, seed=seed))
    details = dict(kappa=k, D=D, R=R, centers=(int(x), int(y)), bound_x=bounds[0],
                   bound_y=bounds[1], rayleigh_x=quotients[0], rayleigh_y=quotients[1],
                   discrete_courant=courant, c_d=c_d,
                   abstract_bound=4.0 * c_d * 2.0 ** nu / R ** 2)
    return leq("cheng", lam, max(bounds), details=details, **common)


# -- Li-Yau and Harnack --------------------------------------------------------------

def _kernel_series(mesh, sources, times, plan):
    U = sg.heat_kernel_series(mesh, sources, times, plan)
    if U.min() <= 0:
        raise ValueError(f"heat kernel has nonpositive entries (min {U.min():.3g}); "
                         "use a positivity-preserving plan")
    return U


def check_li_yau_closed(mesh, t_grid=DEFAULT_T_GRID, x_seeds=None, n_seeds=4, seed=0,
                        slack=0.1, rho_minus=None, plan=sg.POSITIVE_PLAN) -> list:
    """``e^{-2} |grad u|^2/u^2 - u_t/u <= nu/(2t)`` for heat-kernel columns ``u``.

    One outcome per (seed vertex, time), reporting the worst vertex. The
    detail ``sharp_excess`` is the relative excess of ``t (|grad u|^2/u^2 -
    u_t/u)`` over ``n/2``, a pure discretization error when ``rho >= 0``.
    """
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    T = float(t_grid[-1])
    nu = li_yau_nu(mesh.n)
    k, ok = _gate(mesh, rho, T)
    seeds = seed_vertices(mesh, n_seeds, seed) if x_seeds is None else np.asarray(x_seeds)
    anchor = "e^-2 |grad u|^2/u^2 - u_t/u <= nu/(2t)"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor, units="1/time")
    if not ok:
        return [not_met("li_yau_closed", details=dict(kappa_T=k, T=T), **common)]
    U = _kernel_series(mesh, seeds, t_grid, plan)
    out = []
    for i, t in enumerate(t_grid):
        u = U[i]
        g = vertex_gradient_sq(mesh, u) / (u * u)
        ut = time_derivative(mesh, u) / u
        L = math.exp(-2.0) * g - ut
        sharp = t * (g - ut).max(axis=0) / (0.5 * mesh.n) - 1.0
        rhs = nu / (2.0 * t)
        for j, x in enumerate(seeds):
            v = int(np.argmax(L[:, j]))
            details = dict(t=float(t), source=int(x), vertex=v, kappa_T=k,
                           eps_needed=max(0.0, L[v, j] / rhs - 1.0),
                           sharp_excess=max(0.0, float(sharp[j])))
            out.append(leq("li_yau_closed", L[v, j], rhs, tolerance=slack, samples=mesh.N,
                           details=details, **common))
    return out


def harnack_factor(nu, d, s, t):
    """``(t/s)^{nu/2} exp(2 d^2/(t - s))``; the degenerate ``s == t`` needs ``d == 0``."""
    d = np.asarray(d, dtype=float)
    if t == s:
        return np.where(d == 0, 1.0, np.inf)
    with np.errstate(over="ignore"):
        return (t / s) ** (0.5 * nu) * np.exp(2.0 * d * d / (t - s))


def _sample_tuples(mesh, t_grid, n_tuples, seed):
    rng = np.random.default_rng(seed + 1)
    times = np.asarray(sorted(t_grid), dtype=float)
    pairs = [(i, j) for i in range(times.size) for j in range(i + 1, times.size)]
    out = []
    for _ in range(n_tuples):
        i, j = pairs[int(rng.integers(len(pairs)))]
        out.append((int(rng.integers(mesh.N)), int(rng.integers(mesh.N)),
                    float(times[i]), float(times[j])))
    return out


def _group(tuples):
    groups = {}
    for x, y, s, t in tuples:
        if s > t:
            raise ValueError("each tuple needs s <= t")
        groups.setdefault((s, t), []).append((x, y))
    return groups


def check_harnack_closed(mesh, pairs=None, n_tuples=256, n_sources=2, seed=0, slack=0.1,
                         t_grid=(0.2, 0.4, 0.7, 1.0), rho_minus=None,
                         plan=sg.POSITIVE_PLAN) -> list:
    """``u(s,x) <= (t/s)^{nu/2} e^{2 d(x,y)^2/(t-s)} u(t,y)`` for heat-kernel columns.

    ``pairs`` is a list of ``(x, y, s, t)``; by default ``n_tuples`` are
    sampled from ``t_grid``. Each tuple is evaluated for every source, and
    one outcome per (source, s, t) reports the worst ``(x, y)``.
    """
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    tuples = _sample_tuples(mesh, t_grid, n_tuples, seed) if pairs is None else list(pairs)
    groups = _group(tuples)
    times = sorted({s for s, _ in groups} | {t for _, t in groups})
    k, ok = _gate(mesh, rho, max(times))
    anchor = "u(s,x) <= (t/s)^(nu/2) exp(2 d(x,y)^2/(t-s)) u(t,y)"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor)
    if not ok:
        return [not_met("harnack_closed", details=dict(kappa_T=k), **common)]
    nu = li_yau_nu(mesh.n)
    sources = seed_vertices(mesh, n_sources, seed)
    U = _kernel_series(mesh, sources, times, plan)
    idx = {t: i for i, t in enumerate(times)}
    out = []
    for (s, t), xy in sorted(groups.items()):
        xs = np.array([p[0] for p in xy])
        ys = np.array([p[1] for p in xy])
        d = np.array([distances_from(mesh, [x])[0, y] if x != y else 0.0 for x, y in xy])
        fac = harnack_factor(nu, d, s, t)
        for j, z in enumerate(sources):
            lhs = U[idx[s]][xs, j]
            rhs = fac * U[idx[t]][ys, j]
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(np.isinf(rhs), np.inf, rhs / lhs)
            w = int(np.argmin(r))
            details = dict(s=s, t=t, source=int(z), x=int(xs[w]), y=int(ys[w]), d=float(d[w]),
                           kappa_T=k)
            out.append(leq("harnack_closed", lhs[w], rhs[w], tolerance=slack, samples=len(xy),
                           details=details, **common))
    return out


# -- empirical constants ------------------------------------------------------------

def check_carron_bundle(mesh, rho_minus=None, n_seeds=4, n_times=8, seed=0,
                        plan=FAST_PLAN) -> list:
    """Empirical doubling constant, heat-kernel upper constant, ``lambda_1 D^2``
    and the diagonal heat-kernel lower constant.

    Kernel samples use ``n_times`` geometric times in ``(0, D^2/2]`` with the
    endpoint included. Each constant passes when it is finite and positive.
    """
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    D = diameter(mesh)
    k, ok = _gate(mesh, rho, D * D)
    common = dict(digest=mesh.digest, seed=seed)
    names = ("carron.doubling", "carron.heat_upper", "carron.spectral_gap", "carron.heat_lower")
    if not ok:
        return [not_met(n, details=dict(kappa=k), **common) for n in names]
    nu = li_yau_nu(mesh.n)
    Vol = mesh.volume
    c_d = doubling_ratio(mesh, nu, sampling_plan(mesh, seed=seed))
    t_end = 0.5 * D * D
    t_min = max(4.0 * mesh.mean_edge ** 2, t_end / 1000.0)
    times = np.geomspace(t_min, t_end, n_times)
    times[-1] = t_end
    seeds = seed_vertices(mesh, n_seeds, seed)
    U = sg.heat_kernel_series(mesh, seeds, times, plan)
    upper = max(float(U[i].max()) * Vol * t ** (0.5 * nu) / D ** nu for i, t in enumerate(times))
    diag = np.array([[U[i][x, j] for j, x in enumerate(seeds)] for i in range(times.size)])
    vols = np.array([[ball_volume(mesh, int(x), math.sqrt(t)) for x in seeds] for t in times])
    lower = float((diag * vols).min())
    gap = lambda_1(mesh, seed=seed) * D * D
    det = dict(kappa=k, D=D, nu=nu, t_min=float(times[0]), t_max=float(times[-1]))
    return [
        _finite(names[0], c_d, details=dict(det, anchor_form="V(x,R)/V(x,r) <= c_d (R/r)^nu"),
                anchor="V(x,R)/V(x,r) <= c_d (R/r)^nu", **common),
        _finite(names[1], upper, anchor="p_t(x,y) <= c(n) D^nu / Vol t^(-nu/2)",
                details=det, samples=int(times.size * seeds.size), **common),
        _finite(names[2], gap, anchor="lambda_1 >= c / D^2", details=det, **common),
        _finite(names[3], lower, anchor="p_t(x,x) >= eps(n) / V(x, sqrt t)", details=det,
                samples=int(times.size * seeds.size), **common),
    ]


def check_aux_J(mesh, delta=0.1, rho_minus=None, c_n=1.0, Lambda=None, seed=0) -> CheckOutcome:
    """``|J - 1| <= delta`` for ``J`` from the ground state at ``tau_0``, when
    ``kappa_{D^2}(rho_minus) < 1/2 (tau_0 - 1)^{-3}``."""
    _require_closed(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    D = diameter(mesh)
    lam = lambda_1(mesh, seed=seed)
    Lam = lam if Lambda is None else float(Lambda)
    cst = aux_J_constants(mesh.n, D, Lam, delta, c_n)
    k = sg.kappa(mesh, rho, D * D) if np.any(rho) else 0.0
    details = dict(kappa=k, gate=cst.gate, tau0=cst.tau0, tau1=cst.tau1, tau2=cst.tau2,
                   C=cst.C, Lambda=Lam, lambda_1=lam, c_n=c_n, D=D)
    common = dict(digest=mesh.digest, seed=seed, anchor="|J - 1| <= delta when "
                  "kappa_{D^2}(rho_-) < 1/2 (tau_0 - 1)^-3")
    if not k < cst.gate:
        return not_met("aux_J", details=details, **common)
    J, gs = sg.solve_J_elliptic(mesh, rho, cst.tau0)
    dev = float(np.max(np.abs(J - 1.0)))
    details.update(sigma_tilde=gs.sigma_tilde, w_bar=gs.w_bar)
    return leq("aux_J", dev, delta, calibrated=True, details=details, **common)


def heat_constant(mesh, D=None, power=None, n_times=64) -> float:
    """Smallest ``c`` with ``p_t(x,x) <= c D^power / Vol t^{-nu/2}`` on a
    geometric grid of ``t`` in ``(0, D^2/2]`` (dense; ``power`` defaults to ``nu/2``)."""
    nu = li_yau_nu(mesh.n)
    D = diameter(mesh) if D is None else D
    power = 0.5 * nu if power is None else power
    lam, Phi = oracles.dense_eigh(mesh)
    t_end = 0.5 * D * D
    ts = np.geomspace(t_end * 1e-4, t_end, n_times)
    sq = Phi * Phi
    best = 0.0
    for t in ts:
        diag = sq @ np.exp(-lam * t)
        best = max(best, float(diag.max()) * mesh.volume * t ** (0.5 * nu) / D ** power)
    return best


def sg_norm_rhs(kappa, t, T, nu, c_n, D, Vol, D_power=None):
    D_power = 0.5 * nu if D_power is None else D_power
    e = 0.5 * (1.0 + t / T)
    inner = (2.0 / (1.0 - kappa)) ** ((1.0 + kappa) / (1.0 - kappa) * (1.0 + t / T) + 0.5 * nu) \
        * c_n * D ** D_power / Vol * t ** (-0.5 * nu)
    return (1.0 / (1.0 - kappa)) ** e * math.sqrt(inner)


def check_sg_norm_bound(mesh, V, T, t, c_n=None, rho_minus=None, seed=0) -> CheckOutcome:
    """Mass-weighted ``L^2 -> L^inf`` norm of ``e^{t(Delta + V)}`` against its
    explicit bound (dense evaluation).

    ``c_n`` defaults to :func:`heat_constant` of the same mesh, i.e. the
    constant is calibrated on the unperturbed heat kernel.
    """
    _require_closed(mesh)
    oracles._require_small(mesh)
    V = np.asarray(V, dtype=float)
    rho = curvature_deficit(mesh, rho_minus)
    D = diameter(mesh)
    if not 0 < t <= 0.5 * D * D:
        raise ValueError("t must lie in (0, D^2/2]")
    nu = li_yau_nu(mesh.n)
    kV = sg.kappa(mesh, V, T) if np.any(V) else 0.0
    kr, ok = _gate(mesh, rho, D * D)
    anchor = ("||e^{t(Delta+V)}||_{2,inf} <= (1/(1-k))^((1+t/T)/2) ((2/(1-k))^((1+k)/(1-k)"
              "(1+t/T)+nu/2) c_n D^(nu/2)/Vol t^(-nu/2))^(1/2)")
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor)
    if not (ok and kV < 1):
        return not_met("sg_norm_bound", details=dict(kappa_T=kV, kappa_rho=kr), **common)
    c = heat_constant(mesh, D) if c_n is None else float(c_n)
    lam, Q = np.linalg.eigh(oracles.symmetric_generator(mesh, V))
    diag = (Q * Q) @ np.exp(-2.0 * t * lam)
    lhs = math.sqrt(float(np.max(diag / mesh.mass)))
    rhs = sg_norm_rhs(kV, t, T, nu, c, D, mesh.volume)
    details = dict(kappa_T=kV, T=float(T), t=float(t), c_n=c, c_n_calibrated=c_n is None, D=D,
                   rhs_D_nu=sg_norm_rhs(kV, t, T, nu, c, D, mesh.volume, D_power=nu))
    return leq("sg_norm_bound", lhs, rhs, calibrated=True, tolerance=1e-10, details=details,
               **common)


def check_lp_kato_trend(mesh, rho_minus=None, p=2.0, scales=(0.5, 1.0, 2.0, 10.0),
                        tolerance=1e-10, seed=0) -> CheckOutcome:
    """``kappa_{D^2}(s rho) / ||s rho||_p^*`` is independent of ``s`` and finite."""
    _require_closed(mesh)
    if not p > mesh.n / 2:
        raise ValueError("p must exceed n/2")
    rho = curvature_deficit(mesh, rho_minus)
    anchor = "kappa_{D^2}(rho_-) <= C ||rho_-||_p^*"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor)
    if not np.any(rho):
        return not_met("lp_kato_trend", details=dict(reason="not applicable: rho_minus = 0"),
                       **common)
    D = diameter(mesh)
    ratios = np.array([sg.kappa(mesh, s * rho, D * D) / p_mean_norm(mesh, s * rho, p)
                       for s in scales])
    C = float(ratios[list(scales).index(1.0)] if 1.0 in scales else ratios[0])
    spread = float(np.max(np.abs(ratios - C)) / C)
    ok = math.isfinite(C)
    out = leq("lp_kato_trend", spread, tolerance, details=dict(C=C, p=float(p), D=D,
              ratios=ratios.tolist(), scales=list(scales)), **common)
    if not ok:
        out.status = FAIL
    return out
