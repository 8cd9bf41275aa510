"""Inequalities on surfaces with boundary under natural (Neumann) conditions."""
from __future__ import annotations

import math

import numpy as np

from .. import semigroup as sg
from ..fields import time_derivative, vertex_gradient_sq
from ..geometry.curvature import boundary_geometry
from ..geometry.metric import ball_volume, diameter, distances_from
from ..outcome import FAIL, CheckOutcome, leq, not_met
from ..spectrum import eigs
from .closed import (DEFAULT_T_GRID, FAST_PLAN, _kernel_series, _group, _sample_tuples,
                     curvature_deficit, seed_vertices)
from .constants import neumann_constants


def _require_boundary(mesh):
    if mesh.closed:
        raise ValueError("this check needs a mesh with boundary")
    if mesh.spec is None:
        raise ValueError("boundary checks need the analytic spec of the mesh")


def boundary_context(mesh, rho_minus, T):
    """Boundary geometry, ``mu_T(rho_minus)`` and the resulting constants."""
    _require_boundary(mesh)
    rho = curvature_deficit(mesh, rho_minus)
    bg = boundary_geometry(mesh.spec)
    mu = sg.kappa(mesh, rho, T) if np.any(rho) else 0.0
    cst = neumann_constants(mesh.n, bg.H, bg.R, T, mu)
    return rho, bg, cst


def _info(bg, cst):
    d = cst.as_dict()
    d.update(admissible=bg.admissible, K_R=bg.K_R)
    return d


def _J_at(mesh, rho, cst, times):
    """``J`` at each time, shape (len(times), N); identically 1 when ``rho = 0``."""
    if not np.any(rho):
        return np.ones((len(times), mesh.N))
    sol = sg.solve_J_parabolic(mesh, rho, float(cst.c_J), cst.T, times=np.asarray(times))
    return sol.J


def check_li_yau_neumann(mesh, t_grid=DEFAULT_T_GRID, x_seeds=None, n_seeds=4, seed=0,
                         slack=0.1, rho_minus=None, plan=sg.POSITIVE_PLAN) -> list:
    """``a J |grad u|^2/u^2 - u_t/u <= C1 + C2/(J t)`` with ``a = 1/(2(1+H)^2)``.

    ``u`` are Neumann heat-kernel columns and ``J`` the parabolic auxiliary
    function with exponent ``c = (3 + 1/a)/b``. One outcome per (seed
    vertex, time) reports the vertex with the largest ratio of the two sides.
    """
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    T = float(t_grid[-1])
    rho, bg, cst = boundary_context(mesh, rho_minus, T)
    anchor = "J|grad u|^2/(2(1+H)^2 u^2) - u_t/u <= C1 + C2/(J t)"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor, units="1/time")
    if not (bg.admissible and cst.hypothesis_ok):
        return [not_met("li_yau_neumann", details=_info(bg, cst), **common)]
    seeds = seed_vertices(mesh, n_seeds, seed) if x_seeds is None else np.asarray(x_seeds)
    U = _kernel_series(mesh, seeds, t_grid, plan)
    J = _J_at(mesh, rho, cst, t_grid)
    a = float(cst.alpha)
    out = []
    for i, t in enumerate(t_grid):
        u = U[i]
        Jt = J[i][:, None]
        L = a * Jt * vertex_gradient_sq(mesh, u) / (u * u) - time_derivative(mesh, u) / u
        Rhs = cst.C1 + cst.C2 / (Jt * t)
        ratio = L / Rhs
        for j, x in enumerate(seeds):
            v = int(np.argmax(ratio[:, j]))
            details = dict(_info(bg, cst), t=float(t), source=int(x), vertex=v,
                           J_min=float(J[i].min()), eps_needed=max(0.0, ratio[v, j] - 1.0))
            out.append(leq("li_yau_neumann", L[v, j], Rhs[v, 0], tolerance=slack,
                           samples=mesh.N, details=details, **common))
    return out


def check_harnack_neumann(mesh, pairs=None, n_tuples=256, n_sources=2, seed=0, slack=0.1,
                          t_grid=(0.2, 0.4, 0.7, 1.0), rho_minus=None,
                          plan=sg.POSITIVE_PLAN) -> list:
    """Both Neumann Harnack inequalities on Neumann heat-kernel columns.

    ``same_point``: ``u(t1,x) <= (t2/t1)^{C1 T + C2} u(t2,x)``.
    ``two_point``: ``u(t1,x) <= u(t2,y) (t2/t1)^{C2 e^{16 mu}}
    exp(C1 (t2 - t1) + e^{16 mu} (1+H)^2 d^2 / (2 (t2 - t1)))``.
    """
    tuples = _sample_tuples(mesh, t_grid, n_tuples, seed) if pairs is None else list(pairs)
    groups = _group(tuples)
    times = sorted({s for s, _ in groups} | {t for _, t in groups})
    T = float(max(times))
    rho, bg, cst = boundary_context(mesh, rho_minus, T)
    common = dict(digest=mesh.digest, seed=seed)
    names = ("harnack_neumann.same_point", "harnack_neumann.two_point")
    if not (bg.admissible and cst.hypothesis_ok):
        return [not_met(n, details=_info(bg, cst), **common) for n in names]
    sources = seed_vertices(mesh, n_sources, seed)
    U = _kernel_series(mesh, sources, times, plan)
    idx = {t: i for i, t in enumerate(times)}
    E = math.exp(16.0 * cst.mu_T)
    out = []
    for (s, t), xy in sorted(groups.items()):
        xs = np.array([p[0] for p in xy])
        ys = np.array([p[1] for p in xy])
        d = np.array([distances_from(mesh, [x])[0, y] if x != y else 0.0 for x, y in xy])
        with np.errstate(over="ignore", divide="ignore"):
            same = float(np.power(t / s, cst.C1 * T + cst.C2))
            two = (t / s) ** (cst.C2 * E) * np.exp(
                cst.C1 * (t - s) + np.where(d == 0, 0.0, E * (1 + cst.H) ** 2 * d * d
                                            / (2.0 * max(t - s, 0.0))))
        for j, z in enumerate(sources):
            u_s, u_t = U[idx[s]][:, j], U[idx[t]][:, j]
            r1 = same * u_t[xs] / u_s[xs]
            w1 = int(np.argmin(r1))
            out.append(leq(names[0], u_s[xs[w1]], same * u_t[xs[w1]], tolerance=slack,
                           samples=len(xy), anchor="u(t1,x) <= (t2/t1)^(C1 T + C2) u(t2,x)",
                           details=dict(_info(bg, cst), s=s, t=t, source=int(z), x=int(xs[w1])),
                           **common))
            r2 = two * u_t[ys] / u_s[xs]
            w2 = int(np.argmin(r2))
            out.append(leq(names[1], u_s[xs[w2]], two[w2] * u_t[ys[w2]], tolerance=slack,
                           samples=len(xy),
                           anchor="u(x,t1) <= u(y,t2) (t2/t1)^(C2 e^(16mu)) exp(C1(t2-t1) + "
                                  "e^(16mu)(1+H)^2 d^2/(2(t2-t1)))",
                           details=dict(_info(bg, cst), s=s, t=t, source=int(z), x=int(xs[w2]),
                                        y=int(ys[w2]), d=float(d[w2])), **common))
    return out


def neumann_hk_log_constant(cst) -> float:
    """``log(2^{C1 mu} e^{C1 T + 16 mu} (1+H)^2)``."""
    return (cst.C1 * cst.mu_T * math.log(2.0) + cst.C1 * cst.T + 16.0 * cst.mu_T
            + 2.0 * math.log1p(cst.H))


def check_neumann_hk(mesh, t_grid=None, n_seeds=8, seed=0, rho_minus=None, T=None,
                     plan=FAST_PLAN) -> list:
    """``h_t(x,x) Vol(B(x, sqrt t)) <= C`` for ``t in (0, D^2]``; ``T`` defaults to ``2 D^2``.

    ``t_grid`` defaults to 8 geometric times ending at ``D^2``. One outcome per
    time reports the worst seed vertex.
    """
    D = diameter(mesh)
    T = 2.0 * D * D if T is None else float(T)
    rho, bg, cst = boundary_context(mesh, rho_minus, T)
    if t_grid is None:
        t_grid = np.geomspace(D * D / 64.0, D * D, 8)
        t_grid[-1] = D * D
    t_grid = np.asarray(sorted(t_grid), dtype=float)
    if t_grid[0] <= 0 or t_grid[-1] > D * D * (1 + 1e-12):
        raise ValueError("times must lie in (0, D^2]")
    anchor = "h_t(x,x) <= 2^(C1 mu) e^(C1 T + 16 mu) (1+H)^2 / Vol(B(x, sqrt t))"
    common = dict(digest=mesh.digest, seed=seed, anchor=anchor)
    if not (bg.admissible and cst.hypothesis_ok):
        return [not_met("neumann_hk", details=_info(bg, cst), **common)]
    logC = neumann_hk_log_constant(cst)
    C = math.exp(logC) if logC < 700 else math.inf
    seeds = seed_vertices(mesh, n_seeds, seed)
    U = sg.heat_kernel_series(mesh, seeds, t_grid, plan)
    out = []
    for i, t in enumerate(t_grid):
        vals = np.array([U[i][x, j] * ball_volume(mesh, int(x), math.sqrt(t))
                         for j, x in enumerate(seeds)])
        w = int(np.argmax(vals))
        out.append(leq("neumann_hk", vals[w], C, samples=len(seeds),
                       details=dict(_info(bg, cst), t=float(t), x=int(seeds[w]), log_C=logC,
                                    D=D), **common))
    return out


def kernel_row_minimum_integral(mesh, t, modes=64, max_modes=1024, tail=1e-14):
    """``sum_x m_x min_y h_t(x,y)`` from a truncated eigen-expansion.

    Modes are added until ``exp(-eta_K t) <= tail``; returns the value and
    the achieved tail factor.
    """
    k = min(modes, mesh.N - 1)
    while True:
        res = eigs(mesh, "neumann", k=k)
        f = math.exp(-res.eigenvalues[-1] * t)
        if f <= tail or k >= min(max_modes, mesh.N - 1):
            break
        k = min(2 * k, max_modes, mesh.N - 1)
    Phi = res.eigenvectors
    decay = np.exp(-res.eigenvalues * t)
    total = 0.0
    for a in range(0, mesh.N, 512):
        block = (Phi[a:a + 512] * decay) @ Phi.T
        total += float(mesh.mass[a:a + 512] @ block.min(axis=1))
    return total, f, k


def eta1_bounds(cst, D, t):
    """Natural logs of the explicit lower bounds for ``eta_1``: (form at
    ``t``, form at ``t = D^2``). Logs avoid underflow when ``C1`` is large."""
    E = math.exp(16.0 * cst.mu_T)
    common = -cst.C2 * E * math.log(2.0) - E * (1 + cst.H) ** 2 * D * D
    at_t = common - math.log(4.0 * t) - 0.5 * cst.C1 * t
    at_D = common - math.log(2.0 * D * D) - 0.5 * cst.C1 * D * D
    return at_t, at_D


def check_eta1(mesh, rho_minus=None, T=None, seed=0) -> list:
    """``eta_1`` against the explicit bound and the kernel row-minimum bound.

    ``t = min(T, D^2/2)`` with ``T`` defaulting to ``D^2``. The asserted
    explicit bound is ``1/(4t) 2^{-C2 e^{16 mu}} exp(-C1 t/2 - e^{16 mu}
    (1+H)^2 D^2)``; the ``1/(2 D^2)`` form is reported in the details.
    """
    D = diameter(mesh)
    T = D * D if T is None else float(T)
    t = min(T, 0.5 * D * D)
    rho, bg, cst = boundary_context(mesh, rho_minus, T)
    common = dict(digest=mesh.digest, seed=seed, units="1/length^2")
    names = ("eta1.explicit", "eta1.intermediate")
    if not (bg.admissible and cst.hypothesis_ok):
        return [not_met(n, details=_info(bg, cst), **common) for n in names]
    eta1 = float(eigs(mesh, "neumann", k=2, seed=seed).eigenvalues[1])
    log_time, log_diameter = eta1_bounds(cst, D, t)
    explicit = math.exp(log_time)
    integral, tail_factor, modes = kernel_row_minimum_integral(mesh, t)
    inter = integral / (2.0 * t)
    det = dict(_info(bg, cst), eta1=eta1, t=t, D=D, diameter_form=math.exp(log_diameter),
               log_diameter_form=log_diameter, time_form=explicit, log_time_form=log_time,
               kernel_tail=tail_factor, modes=modes)
    out = [leq(names[0], explicit, eta1, details=det, anchor="eta_1 >= 1/(4t) 2^(-C2 e^(16mu)) "
               "exp(-C1 t/2 - e^(16mu)(1+H)^2 D^2)", **common),
           leq(names[1], inter, eta1, details=dict(det, intermediate=inter),
               anchor="eta_1 >= 1/(2t) int min_y h_t(x,y) dx", **common)]
    # the explicit bound is positive whenever its logarithm is finite
    for o, ok in zip(out, (math.isfinite(log_time), inter > 0)):
        if not ok:
            o.status = FAIL
            o.margin = -math.inf
    return out


def check_J_bracket(mesh, rho_minus=None, T=1.0, tolerance=1e-8, seed=0) -> CheckOutcome:
    """``e^{-16 mu_T} <= J <= 1`` for the parabolic ``J`` with the boundary exponent."""
    rho, bg, cst = boundary_context(mesh, rho_minus, T)
    common = dict(digest=mesh.digest, seed=seed, anchor="exp(-16 mu_T) <= J <= 1",
                  tolerance=tolerance)
    if not cst.mu_T < 1.0 / (2.0 * (float(cst.c_J) - 1.0)):
        return not_met("J_bracket", details=_info(bg, cst), **common)
    times = float(T) * np.arange(1, 51) / 50
    J = _J_at(mesh, rho, cst, times)
    lo, hi = float(J.min()), float(J.max())
    # report the tighter side; both must hold
    below = cst.J_floor - lo
    above = hi - 1.0
    lhs, rhs = (hi, 1.0) if above >= below else (cst.J_floor, lo)
    return leq("J_bracket", lhs, rhs, abs_tol=tolerance, samples=J.size,
               details=dict(_info(bg, cst), J_min=lo, J_max=hi, floor=cst.J_floor), **common)
