"""Scalar fields on meshes: test potentials and reconstructed gradients."""
from __future__ import annotations

import numpy as np

from .geometry.mesh import DiscreteManifold, _heron, cotangents
from .geometry.metric import distances_from


def bump(mesh: DiscreteManifold, x, width, amplitude=1.0) -> np.ndarray:
    """Gaussian ``amplitude * exp(-d(x, .)^2 / (2 width^2))`` in geodesic distance."""
    if not width > 0:
        raise ValueError("width must be positive")
    d = distances_from(mesh, [int(x)])[0]
    return amplitude * np.exp(-0.5 * (d / width) ** 2)


def random_bumps(mesh: DiscreteManifold, count, seed=0, width=None, amplitude=1.0):
    """``count`` bump potentials with seeded random centers and widths.

    Widths are drawn uniformly from ``[0.5, 1.5] * width``; ``width`` defaults
    to a tenth of the square root of the volume.
    """
    rng = np.random.default_rng(seed)
    w0 = 0.1 * np.sqrt(mesh.volume) if width is None else float(width)
    out = []
    for _ in range(count):
        x = int(rng.integers(mesh.N))
        out.append(bump(mesh, x, w0 * rng.uniform(0.5, 1.5), amplitude))
    return out


def face_gradient_sq(mesh: DiscreteManifold, u) -> np.ndarray:
    """``|grad u|^2`` of the piecewise-linear interpolant on each face.

    Uses only the intrinsic edge lengths: on a triangle with area ``A``,
    ``A |grad u|^2 = 1/2 sum_k cot(theta_k) (u_i - u_j)^2`` over the corners
    ``k`` opposite the edges ``(i, j)``.
    """
    u = np.asarray(u, dtype=float)
    F = mesh.faces
    cot = cotangents(mesh.face_lengths)
    e = np.zeros(F.shape[0] if u.ndim == 1 else (F.shape[0],) + u.shape[1:])
    for k in range(3):
        du = u[F[:, (k + 1) % 3]] - u[F[:, (k + 2) % 3]]
        c = cot[:, k] if u.ndim == 1 else cot[:, k, None]
        e += 0.5 * c * du * du
    area = _heron(mesh.face_lengths)
    return np.maximum(e, 0.0) / (area if u.ndim == 1 else area[:, None])


def vertex_gradient_sq(mesh: DiscreteManifold, u) -> np.ndarray:
    """Face values of ``|grad u|^2`` averaged to vertices with weights ``area / 3``.

    With these weights ``sum_v mass_v g_v`` equals the Dirichlet energy of
    ``u`` on the current triangulation. ``u`` may be (N,) or (N, k).
    """
    g = face_gradient_sq(mesh, u)
    w = _heron(mesh.face_lengths) / 3.0
    out = np.zeros((mesh.N,) + g.shape[1:])
    wg = g * (w if g.ndim == 1 else w[:, None])
    for k in range(3):
        np.add.at(out, mesh.faces[:, k], wg)
    return out / (mesh.mass if out.ndim == 1 else mesh.mass[:, None])


def time_derivative(mesh: DiscreteManifold, u, V=None) -> np.ndarray:
    """Semi-discrete generator ``-M^{-1} K u (+ V u)``."""
    u = np.asarray(u, dtype=float)
    m = mesh.mass if u.ndim == 1 else mesh.mass[:, None]
    du = -(mesh.stiffness @ u) / m
    if V is not None:
        V = np.asarray(V, dtype=float)
        du = du + (V if u.ndim == 1 else V[:, None]) * u
    return du
