"""Dense-algebra reference computations for small meshes.

Everything here goes through the symmetric matrix
``S = M^{-1/2} (K - M V) M^{-1/2}`` and its full eigendecomposition, so the
results are exact up to floating-point roundoff.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

DENSE_LIMIT = 300


class OracleError(ValueError):
    pass


def _require_small(mesh, limit=DENSE_LIMIT):
    if mesh.N > limit:
        raise OracleError(f"dense oracle needs N <= {limit}, mesh has {mesh.N}")


def symmetric_generator(mesh, V=None):
    s = 1.0 / np.sqrt(mesh.mass)
    A = mesh.stiffness.toarray()
    if V is not None:
        A = A - np.diag(mesh.mass * np.asarray(V, dtype=float))
    S = s[:, None] * A * s[None, :]
    return 0.5 * (S + S.T)


def dense_eigh(mesh, V=None, limit=DENSE_LIMIT):
    """Eigenvalues and mass-orthonormal eigenvectors of ``K phi = lam M phi`` (shifted by V)."""
    _require_small(mesh, limit)
    lam, Q = sla.eigh(symmetric_generator(mesh, V))
    return lam, Q / np.sqrt(mesh.mass)[:, None]


def semigroup_matrix(mesh, t, V=None, limit=DENSE_LIMIT):
    """Matrix of ``e^{t(Delta + V)}`` acting on vertex values."""
    _require_small(mesh, limit)
    lam, Q = sla.eigh(symmetric_generator(mesh, V))
    r = np.sqrt(mesh.mass)
    E = (Q * np.exp(-t * lam)) @ Q.T
    return (E / r[:, None]) * r[None, :]


def heat_apply(mesh, f, t, V=None):
    return semigroup_matrix(mesh, t, V) @ np.asarray(f, dtype=float)


def heat_kernel(mesh, t, V=None):
    """``p_t(x, y)`` as a dense symmetric matrix."""
    return semigroup_matrix(mesh, t, V) / mesh.mass[None, :]


def time_integral(mesh, V, T):
    """``int_0^T P_t V dt`` by integrating each eigenmode exactly."""
    _require_small(mesh)
    lam, Q = sla.eigh(symmetric_generator(mesh))
    r = np.sqrt(mesh.mass)
    coef = Q.T @ (r * np.asarray(V, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(np.abs(lam) * T > 1e-12, -np.expm1(-lam * T) / lam, T)
    return (Q @ (g * coef)) / r


def kappa(mesh, V, T):
    return float(np.max(np.abs(time_integral(mesh, V, T))))


def c_alpha(mesh, V, alpha):
    _require_small(mesh)
    A = mesh.stiffness.toarray() + alpha * np.diag(mesh.mass)
    u = np.linalg.solve(A, mesh.mass * np.asarray(V, dtype=float))
    return float(np.max(np.abs(u)))


def ground_state(mesh, V):
    """``(sigma_tilde, w)`` with ``w > 0`` and ``(1/Vol) sum m w^2 = 1``."""
    lam, Phi = dense_eigh(mesh, V)
    w = Phi[:, 0]
    w = w * np.sign(w.sum())
    w = w / np.sqrt((mesh.mass @ (w * w)) / mesh.volume)
    return float(-lam[0]), w


def duhamel(mesh, V, f, t, n_quad=64, iterations=60, tol=1e-13):
    """Fixed-point iteration of ``u(t) = P_t f + int_0^t P_{t-s} (V u(s)) ds``.

    Uses Gauss-Legendre quadrature on ``[0, t]`` with exact heat propagators,
    independent of the Schrödinger generator.
    """
    _require_small(mesh)
    V = np.asarray(V, dtype=float)
    lam, Q = sla.eigh(symmetric_generator(mesh))
    r = np.sqrt(mesh.mass)

    def P(tau, g):
        return (Q @ (np.exp(-tau * lam) * (Q.T @ (r * g)))) / r

    x, wq = np.polynomial.legendre.leggauss(n_quad)
    s = 0.5 * t * (x + 1.0)
    wq = 0.5 * t * wq
    f = np.asarray(f, dtype=float)
    # u at the quadrature nodes; u(s_i) = P_{s_i} f + int_0^{s_i} ... approximated by a
    # sub-rule mapped onto [0, s_i]
    U = np.stack([P(si, f) for si in s])
    for _ in range(iterations):
        U_new = np.empty_like(U)
        for i, si in enumerate(s):
            acc = P(si, f)
            ss = 0.5 * si * (x + 1.0)
            ww = 0.5 * si * wq / (0.5 * t)
            # interpolate u at the sub-nodes from the node values (barycentric in s)
            Ui = _interp(s, U, ss)
            for sj, wj, uj in zip(ss, ww, Ui):
                acc = acc + wj * P(si - sj, V * uj)
            U_new[i] = acc
        done = np.max(np.abs(U_new - U)) <= tol * np.max(np.abs(U_new))
        U = U_new
        if done:
            break
    out = P(t, f)
    for sj, wj, uj in zip(s, wq, U):
        out = out + wj * P(t - sj, V * uj)
    return out


def _interp(nodes, values, at):
    """Lagrange interpolation of node values (Gauss nodes, so well conditioned)."""
    n = nodes.size
    L = np.ones((at.size, n))
    for j in range(n):
        for k in range(n):
            if k != j:
                L[:, j] *= (at - nodes[k]) / (nodes[j] - nodes[k])
    return np.tensordot(L, values, axes=(1, 0))
