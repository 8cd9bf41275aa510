"""Distances, diameter, ball volumes and empirical volume doubling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .. import kernels
from .mesh import DiscreteManifold

EXACT_DIAMETER_LIMIT = 5000
N_LANDMARKS = 32


class MetricError(ValueError):
    pass


def _kernel_args(mesh):
    ptr, vff, vfc = mesh.vertex_faces
    faces = np.ascontiguousarray(mesh.faces, dtype=np.int32)
    return faces, mesh.face_lengths, ptr, vff, vfc


def _check_connected(mesh):
    if "connected" not in mesh._cache:
        ncomp, _ = connected_components(mesh.stiffness != 0, directed=False)
        mesh._cache["connected"] = ncomp == 1
    if not mesh._cache["connected"]:
        raise MetricError("mesh is disconnected")


def distances_from(mesh: DiscreteManifold, sources) -> np.ndarray:
    """Fast-marching distances from each source vertex, shape (S, N)."""
    _check_connected(mesh)
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if src.size and (src.min() < 0 or src.max() >= mesh.N):
        raise IndexError("source vertex out of range")
    cache = mesh._cache.setdefault("dist", {})
    missing = [int(s) for s in dict.fromkeys(src.tolist()) if int(s) not in cache]
    if missing:
        D = kernels.fmm_distances(*_kernel_args(mesh), np.asarray(missing, dtype=np.int64), mesh.N)
        for s, row in zip(missing, D):
            row.setflags(write=False)
            cache[s] = row
    return np.stack([cache[int(s)] for s in src]) if src.size else np.empty((0, mesh.N))


def geodesic_distance(mesh: DiscreteManifold, i: int, j: int) -> float:
    """Approximate geodesic distance between vertices ``i`` and ``j``."""
    if i == j:
        return 0.0
    return float(distances_from(mesh, [i])[0, j])


@dataclass(frozen=True)
class DiameterInfo:
    value: float
    upper: float
    exact: bool
    pair: tuple

    @property
    def slack(self):
        return self.upper - self.value


def diameter_info(mesh: DiscreteManifold) -> DiameterInfo:
    """Diameter with an upper bound.

    All-pairs eccentricities for ``N <= 5000``; above that, farthest-point
    landmarks give a lower value and ``2 * min eccentricity`` an upper bound.
    """
    info = mesh._cache.get("diameter")
    if info is not None:
        return info
    _check_connected(mesh)
    args = _kernel_args(mesh)
    if mesh.N <= EXACT_DIAMETER_LIMIT:
        ecc, far = kernels.fmm_eccentricities(*args, np.arange(mesh.N, dtype=np.int64), mesh.N)
        i = int(np.argmax(ecc))
        mesh._cache["eccentricity"] = ecc
        info = DiameterInfo(float(ecc[i]), float(ecc[i]), True, (i, int(far[i])))
    else:
        src = [0]
        eccs, pairs = [], []
        for _ in range(N_LANDMARKS):
            e, f = kernels.fmm_eccentricities(*args, np.asarray(src[-1:], dtype=np.int64), mesh.N)
            eccs.append(float(e[0]))
            pairs.append((src[-1], int(f[0])))
            if int(f[0]) in src:
                break
            src.append(int(f[0]))
        k = int(np.argmax(eccs))
        info = DiameterInfo(eccs[k], min(2.0 * min(eccs), 2.0 * eccs[k]), False, pairs[k])
    mesh._cache["diameter"] = info
    return info


def diameter(mesh: DiscreteManifold) -> float:
    """Largest pairwise fast-marching distance."""
    return diameter_info(mesh).value


def eccentricities(mesh: DiscreteManifold) -> np.ndarray:
    """Per-vertex eccentricity (exact meshes only)."""
    diameter_info(mesh)
    ecc = mesh._cache.get("eccentricity")
    if ecc is None:
        raise MetricError("eccentricities are only stored for N <= %d" % EXACT_DIAMETER_LIMIT)
    return ecc


def ball_volume(mesh: DiscreteManifold, x: int, r) -> np.ndarray | float:
    """Area of the geodesic ball ``B(x, r)`` (``r`` may be an array).

    Each vertex contributes the fraction ``clip((r - d)/w + 1/2, 0, 1)`` of
    its mass, with ``w = sqrt(mass)`` the width of its cell, so the estimate
    is continuous in ``r`` instead of jumping by whole cells. The result is
    at least the mass of ``x`` (the value at ``r = 0``) and equals the total
    mass once ``r`` reaches the eccentricity of ``x``. Nondecreasing in ``r``.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    x = int(x)
    d = distances_from(mesh, [x])[0]
    w = np.sqrt(mesh.mass)
    rr = r_arr.reshape(-1)
    out = np.empty(rr.size)
    for k, rk in enumerate(rr):
        out[k] = mesh.mass @ np.clip((rk - d) / w + 0.5, 0.0, 1.0)
    out = np.maximum(out, mesh.mass[x])
    out[rr >= d.max()] = mesh.mass.sum()
    out = out.reshape(r_arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SamplingPlan:
    """Ball centers and radius grid for doubling measurements."""

    centers: tuple
    radii: tuple
    seed: int = 0


def sampling_plan(mesh: DiscreteManifold, n_centers=8, n_radii=12, seed=0) -> SamplingPlan:
    """Random centers and a geometric radius grid from the mean edge to the diameter."""
    rng = np.random.default_rng(seed)
    centers = rng.choice(mesh.N, size=min(n_centers, mesh.N), replace=False)
    D = diameter(mesh)
    radii = np.geomspace(mesh.mean_edge, D, n_radii)
    radii[-1] = D
    return SamplingPlan(tuple(int(c) for c in np.sort(centers)), tuple(float(r) for r in radii), seed)


def doubling_ratio(mesh: DiscreteManifold, nu: float, samples: SamplingPlan) -> float:
    """Empirical doubling constant ``max V(x,R)/V(x,r) * (r/R)^nu`` over ``r <= R``."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if samples is None or not samples.centers or not samples.radii:
        raise ValueError("empty sampling plan")
    radii = np.sort(np.asarray(samples.radii, dtype=float))
    best = 0.0
    for x in samples.centers:
        V = ball_volume(mesh, int(x), radii)
        ratio = (V[None, :] / V[:, None]) * (radii[:, None] / radii[None, :]) ** nu
        ratio = np.triu(ratio)  # keep r <= R
        best = max(best, float(ratio.max()))
    return best
