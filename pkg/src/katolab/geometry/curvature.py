"""Curvature fields sampled from the analytic profile, and boundary geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import DiscreteManifold
from .spec import ManifoldSpec, SpecError

_POLE_EPS = 1e-12
_COLLAR_SAMPLES = 1025


def gauss_curvature(spec: ManifoldSpec, t) -> np.ndarray:
    """``K(t) = -f''(t)/f(t)``, with ``-f'''/f'`` at poles (l'Hopital)."""
    t = np.asarray(t, dtype=float)
    if spec.is_torus:
        return np.zeros_like(t)
    f = spec.revolution[0]
    fv, f1, f2, f3 = f(t), f(t, 1), f(t, 2), f(t, 3)
    pole = np.abs(fv) < _POLE_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(pole, -f3 / np.where(pole, f1, 1.0), -f2 / np.where(pole, 1.0, fv))
    return K


def ricci_lower_field(spec: ManifoldSpec, mesh: DiscreteManifold) -> np.ndarray:
    """Lowest Ricci eigenvalue per vertex; equals the Gauss curvature in dimension 2."""
    if mesh.spec is None or mesh.spec != spec:
        raise SpecError("mesh was not built from this spec")
    if spec.is_torus:
        return np.zeros(mesh.N)
    return gauss_curvature(spec, mesh.coords[:, 0])


def rho_minus(rho) -> np.ndarray:
    """Negative part ``max(0, -rho)``."""
    return np.maximum(0.0, -np.asarray(rho, dtype=float))


@dataclass(frozen=True)
class BoundaryGeometry:
    """Boundary bending bound ``II >= -H``, rolling radius and collar curvature.

    ``II`` lists ``(t, value)`` for each boundary circle.
    """

    H: float
    R: float
    K_R: float
    admissible: bool
    II: tuple = ()


def second_fundamental_form(spec: ManifoldSpec):
    """Constant value of II on each boundary circle, w.r.t. the inward normal."""
    if not spec.has_boundary:
        raise SpecError("closed spec has no boundary")
    f, t0, t1, kind = spec.revolution
    out = [(t1, float(f(t1, 1) / f(t1)))]
    if kind == "two_boundaries":
        out.insert(0, (t0, float(-f(t0, 1) / f(t0))))
    return tuple(out)


def collar_curvature(spec: ManifoldSpec, R: float) -> float:
    """``max(0, sup K)`` over the boundary collar of width ``R``."""
    f, t0, t1, kind = spec.revolution
    ts = [np.linspace(max(t0, t1 - R), t1, _COLLAR_SAMPLES)]
    if kind == "two_boundaries":
        ts.append(np.linspace(t0, min(t1, t0 + R), _COLLAR_SAMPLES))
    K = max(float(np.max(gauss_curvature(spec, t))) for t in ts)
    return max(0.0, K)


def rolling_conditions(H: float, K: float, R: float):
    """Left sides of the two admissibility inequalities (flat limit when ``K == 0``)."""
    if K > 0.0:
        s = math.sqrt(K)
        if R * s >= 0.5 * math.pi:
            return math.inf, math.inf
        tn = math.tan(R * s)
        return s * tn, (H / s) * tn
    return 0.0, H * R


def _admissible(H, K, R):
    a, b = rolling_conditions(H, K, R)
    return a <= 0.5 * (1.0 + H) and b <= 0.5


def boundary_geometry(spec: ManifoldSpec, R=None) -> BoundaryGeometry:
    """Boundary data of a family with boundary.

    With ``R`` omitted, returns the largest admissible rolling radius not
    exceeding 1 or the geometric limit of the family (the disk radius, the
    cap depth, or half the width of a band).
    """
    II = second_fundamental_form(spec)
    H = max(0.0, -min(v for _, v in II))
    _, t0, t1, kind = spec.revolution
    r_geom = (t1 - t0) if kind == "capped" else 0.5 * (t1 - t0)
    if R is not None:
        R = float(R)
        if not R > 0:
            raise ValueError("R must be positive")
        K = collar_curvature(spec, R)
        return BoundaryGeometry(H, R, K, bool(R <= r_geom and _admissible(H, K, R)), II)
    hi = min(1.0, r_geom)
    if _admissible(H, collar_curvature(spec, hi), hi):
        R = hi
    else:
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _admissible(H, collar_curvature(spec, mid), mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        R = lo
    K = collar_curvature(spec, R)
    return BoundaryGeometry(H, R, K, bool(R > 0 and _admissible(H, K, R)), II)
