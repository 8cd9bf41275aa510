"""Laplace and Schrödinger eigenproblems on discrete surfaces.

All problems are the generalized pencil ``K phi = lam M phi`` (restricted to
a vertex subset for Dirichlet balls), solved through the symmetric matrix
``M^{-1/2} K M^{-1/2}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .geometry.mesh import DiscreteManifold, assemble
from .geometry.metric import distances_from
from .outcome import CheckOutcome, leq, not_met
from . import semigroup as sg

DENSE_LIMIT = 300
MIN_BALL_VERTICES = 10


@dataclass(frozen=True)
class DirichletBall:
    """Dirichlet problem on the geodesic ball ``B(x, R)``.

    Interior vertices are those with ``d(x, v) < R - inset * h``, where ``h``
    is the mean edge length; all other rows and columns are deleted. The
    deleted layer sits partly outside the ball, so the effective radius of
    the discrete problem exceeds the cutoff radius; the default inset of a
    quarter edge was fitted on flat disks and converges under refinement.
    """

    x: int
    R: float
    inset: float = 0.25


@dataclass(frozen=True)
class NeumannBall:
    """Natural boundary conditions on the union of faces inside ``B(x, R)``."""

    x: int
    R: float


@dataclass
class SpectralResult:
    bc: object
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    vertices: np.ndarray | None = None  # support for restricted problems

    @property
    def first_nonzero(self) -> float:
        """``lambda_1``: index 1 for closed/Neumann problems, 0 for Dirichlet."""
        return float(self.eigenvalues[0 if isinstance(self.bc, DirichletBall) else 1])

    def to_csv(self) -> str:
        lines = ["index,eigenvalue,residual"]
        for i, (lam, r) in enumerate(zip(self.eigenvalues.tolist(), self.residuals.tolist())):
            lines.append(f"{i},{lam!r},{r!r}")
        return "\n".join(lines) + "\n"


def _solve(K, m, k, seed, method, sigma):
    N = K.shape[0]
    if k >= N:
        raise ValueError(f"k = {k} must be smaller than the problem size {N}")
    r = 1.0 / np.sqrt(m)
    if method == "auto":
        method = "dense" if N <= DENSE_LIMIT else "sparse"
    if method == "dense":
        S = (r[:, None] * K.toarray()) * r[None, :]
        lam, Q = sla.eigh(0.5 * (S + S.T), subset_by_index=[0, k - 1])
    elif method == "sparse":
        S = sps.diags(r) @ K @ sps.diags(r)
        S = (0.5 * (S + S.T)).tocsc()
        v0 = np.random.default_rng(seed).standard_normal(N)
        lam, Q = spla.eigsh(S, k=k, sigma=sigma, which="LM", v0=v0, tol=0.0)
        order = np.argsort(lam)
        lam, Q = lam[order], Q[:, order]
    else:
        raise ValueError(f"unknown method {method!r}")
    Phi = Q * r[:, None]
    # mass-orthonormal: Phi^T M Phi = I
    resid = K @ Phi - (m[:, None] * Phi) * lam[None, :]
    denom = np.linalg.norm(m[:, None] * Phi, axis=0)
    return lam, Phi, np.linalg.norm(resid, axis=0) / denom


def submesh(mesh: DiscreteManifold, keep) -> tuple[DiscreteManifold, np.ndarray]:
    """Faces whose three vertices are all in ``keep``, as a new mesh."""
    keep = np.asarray(keep, dtype=bool)
    fmask = keep[mesh.faces].all(axis=1)
    verts = np.unique(mesh.faces[fmask])
    remap = -np.ones(mesh.N, dtype=np.int64)
    remap[verts] = np.arange(verts.size)
    sub = assemble(mesh.coords[verts], remap[mesh.faces[fmask]], mesh.face_lengths[fmask],
                   spec=None, m_matrix=False)
    return sub, verts


def ball_vertices(mesh, bc: DirichletBall) -> np.ndarray:
    d = distances_from(mesh, [bc.x])[0]
    return np.nonzero(d < bc.R - bc.inset * mesh.mean_edge)[0]


def eigs(mesh: DiscreteManifold, bc="closed", k=6, seed=0, method="auto") -> SpectralResult:
    """Lowest ``k`` eigenpairs of ``K phi = lam M phi``.

    Parameters
    ----------
    bc : "closed", "neumann", DirichletBall or NeumannBall
    method : "auto" (dense for small problems), "dense" or "sparse"
    """
    if isinstance(bc, str):
        if bc not in ("closed", "neumann"):
            raise ValueError(f"unknown boundary condition {bc!r}")
        if bc == "closed" and not mesh.closed:
            raise ValueError("mesh has boundary; use bc='neumann'")
        if bc == "neumann" and mesh.closed:
            raise ValueError("mesh is closed; use bc='closed'")
        lam, Phi, res = _solve(mesh.stiffness, mesh.mass, k, seed, method, -0.1)
        return SpectralResult(bc, lam, Phi, res)
    if isinstance(bc, DirichletBall):
        idx = ball_vertices(mesh, bc)
        if idx.size < MIN_BALL_VERTICES:
            raise ValueError(f"ball B({bc.x}, {bc.R:g}) has {idx.size} < {MIN_BALL_VERTICES} "
                             "interior vertices")
        K = mesh.stiffness[idx][:, idx].tocsr()
        lam, Phi, res = _solve(K, mesh.mass[idx], min(k, idx.size - 1), seed, method, 0.0)
        return SpectralResult(bc, lam, Phi, res, vertices=idx)
    if isinstance(bc, NeumannBall):
        d = distances_from(mesh, [bc.x])[0]
        sub, verts = submesh(mesh, d <= bc.R)
        if sub.N < MIN_BALL_VERTICES:
            raise ValueError("ball too small")
        lam, Phi, res = _solve(sub.stiffness, sub.mass, min(k, sub.N - 1), seed, method, -0.1)
        return SpectralResult(bc, lam, Phi, res, vertices=verts)
    raise TypeError(f"unsupported boundary condition {bc!r}")


def lambda_1(mesh, seed=0, method="auto") -> float:
    """First nonzero eigenvalue of the closed or Neumann Laplacian (cached)."""
    key = ("lambda_1", method)
    if key not in mesh._cache:
        bc = "closed" if mesh.closed else "neumann"
        mesh._cache[key] = eigs(mesh, bc, k=2, seed=seed, method=method).eigenvalues[1]
    return float(mesh._cache[key])


def rayleigh_quotient(mesh, f) -> float:
    f = np.asarray(f, dtype=float)
    return float(f @ (mesh.stiffness @ f)) / float(f @ (mesh.mass * f))


# -- Schrödinger ground state ------------------------------------------------------

@dataclass
class GroundState:
    """``Delta w + V w = sigma_tilde w`` with ``w > 0`` and ``||w||_2^* = 1``."""

    sigma_tilde: float
    w: np.ndarray
    w_bar: float
    residual: float


def ground_state_schrodinger(mesh: DiscreteManifold, V, seed=0, method="auto") -> GroundState:
    """Top of the spectrum of ``Delta + V``, i.e. minus the bottom of ``K - M V``."""
    V = np.asarray(V, dtype=float)
    if V.shape != (mesh.N,):
        raise ValueError("potential has wrong length")
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ValueError("potential must be finite and nonnegative")
    A = (mesh.stiffness - sps.diags(mesh.mass * V)).tocsr()
    sigma = -float(V.max()) - 1.0
    lam, Phi, res = _solve(A, mesh.mass, 1, seed, method, sigma)
    w = Phi[:, 0]
    w = w * (1.0 if w.sum() >= 0 else -1.0)
    w = w / np.sqrt((mesh.mass @ (w * w)) / mesh.volume)
    if np.any(w <= 0):
        # Perron vector of an irreducible M-matrix is positive; tiny negatives are roundoff
        w = np.maximum(w, np.finfo(float).tiny)
    w_bar = float(mesh.mass @ w) / mesh.volume
    return GroundState(float(-lam[0]), w, w_bar, float(res[0]))


def p_mean_norm(mesh: DiscreteManifold, f, p) -> float:
    """``((1/Vol) sum m |f|^p)^{1/p}``."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    f = np.abs(np.asarray(f, dtype=float))
    if np.isinf(p):
        return float(f.max())
    return float(((mesh.mass @ f ** p) / mesh.volume) ** (1.0 / p))


# -- oscillation inequalities for the ground state --------------------------------

def c_n_nu(nu, c_n=1.0) -> float:
    """``8^{3/2 + nu/4} c(n)^{1/2}``."""
    return 8.0 ** (1.5 + nu / 4.0) * c_n ** 0.5


def oscillation_suite(mesh: DiscreteManifold, V, alpha, T, Lambda=None, c_n=1.0, D=None,
                      seed=0, n_test=20, plan=sg.DEFAULT_PLAN) -> list[CheckOutcome]:
    """Form bound, gradient bound, L2 and sup oscillation of ``w``, ``wbar > 1/2`` and
    the Poincaré inequality, evaluated for the Schrödinger ground state ``w``.

    ``Lambda`` defaults to the measured ``lambda_1``; ``D`` to the mesh diameter.
    The form bound is checked on ``w`` and on ``n_test`` random fields and the
    worst case is reported.
    """
    from .geometry.metric import diameter

    V = np.asarray(V, dtype=float)
    nu = np.e ** 2 * mesh.n
    Vol = mesh.volume
    K, m = mesh.stiffness, mesh.mass
    gs = ground_state_schrodinger(mesh, V, seed=seed)
    w = gs.w
    ca = sg.c_alpha(mesh, V, alpha)
    lam1 = lambda_1(mesh)
    Lam = lam1 if Lambda is None else float(Lambda)
    D = diameter(mesh) if D is None else float(D)
    common = dict(digest=mesh.digest, seed=seed)
    grad_w = float(w @ (K @ w))
    h = w - gs.w_bar
    # roundoff floor: w is normalized so that integrals of w^2 are of size Vol
    eps = 1e-10 * Vol
    out = []
    info = {"c_alpha": ca, "alpha": float(alpha), "Lambda": Lam, "lambda_1": lam1,
            "sigma_tilde": gs.sigma_tilde}

    if not ca < 1:
        for name in ("form_bound", "gradient_bound", "two_norm", "sup_norm", "wbar_half"):
            out.append(not_met(f"oscillation.{name}", details=dict(info), **common,
                               anchor="requires c_alpha(V) < 1"))
    else:
        # form bound on w and random fields; exact for M-matrix discretizations
        rng = np.random.default_rng(seed)
        tests = [w] + [rng.standard_normal(mesh.N) for _ in range(n_test)]
        worst = None
        for phi in tests:
            lhs = float(m @ (V * phi * phi))
            rhs = ca * float(phi @ (K @ phi)) + alpha * ca * float(m @ (phi * phi))
            o = leq("oscillation.form_bound", lhs, rhs, tolerance=1e-10, samples=len(tests),
                    abs_tol=1e-10 * float(m @ (phi * phi)),
                    anchor="int V phi^2 <= c_a int |grad phi|^2 + a c_a int phi^2",
                    details=dict(info), **common)
            if worst is None or o.margin / max(abs(rhs), 1e-300) < worst.margin / max(abs(worst.rhs), 1e-300):
                worst = o
        out.append(worst)
        grad_rhs = alpha * ca / (1.0 - ca) * Vol
        out.append(leq("oscillation.gradient_bound", grad_w, grad_rhs, tolerance=1e-10, abs_tol=eps,
                       anchor="int |grad w|^2 <= a c_a / (1 - c_a) Vol", details=dict(info),
                       **common))
        two = float(m @ (h * h))
        out.append(leq("oscillation.two_norm", two, grad_rhs / Lam, tolerance=1e-10, abs_tol=eps,
                       anchor="||w - wbar||_2^2 <= Lambda^-1 a c_a / (1 - c_a) Vol",
                       details=dict(info), **common))
        kT = sg.kappa(mesh, V, T, plan)
        info2 = dict(info, kappa_T=kT, T=float(T), D=D, c_n=c_n, nu=nu)
        if kT < 0.5:
            base = (2.0 ** (3.0 * D * D / (2.0 * T)) * c_n_nu(nu, c_n) * D ** (-nu / 2.0)
                    * (1.0 - kT) / (1.0 - 2.0 * kT) * Lam ** -0.5)
            sup_rhs = base * np.sqrt(alpha * ca / (1.0 - ca))
            out.append(leq("oscillation.sup_norm", float(np.max(np.abs(h))), sup_rhs,
                           calibrated=True, tolerance=1e-10, abs_tol=1e-10,
                           anchor="||w - wbar||_inf <= 2^(3D^2/2T) c_{n,nu} D^(-nu/2) "
                                  "(1-k)/(1-2k) Lambda^(-1/2) sqrt(a c_a/(1-c_a))",
                           details=info2, **common))
            Kc = base * np.sqrt(2.0 * alpha * ca / (1.0 - ca))
            if Kc < 0.5:
                out.append(leq("oscillation.wbar_half", 0.5, gs.w_bar, calibrated=True,
                               anchor="wbar > 1/2 when the sup-norm constant is < 1/2",
                               details=dict(info2, K=Kc), **common))
            else:
                out.append(not_met("oscillation.wbar_half", 0.5, gs.w_bar,
                                   anchor="requires K < 1/2", details=dict(info2, K=Kc),
                                   **common))
        else:
            out.append(not_met("oscillation.sup_norm", anchor="requires kappa_T(V) < 1/2",
                               details=info2, **common))
            out.append(not_met("oscillation.wbar_half", anchor="requires kappa_T(V) < 1/2",
                               details=info2, **common))
    # Poincare inequality with the chosen Lambda; holds for any Lambda <= lambda_1
    out.append(leq("oscillation.poincare", float(m @ (h * h)), grad_w / Lam, tolerance=1e-10,
                   abs_tol=eps,
                   anchor="||w - wbar||_2^2 <= Lambda^-1 ||grad w||_2^2",
                   details=dict(info), **common))
    return out


def check_ground_state_bound(mesh: DiscreteManifold, V, alpha=1.0, tolerance=1e-10,
                             seed=0) -> list[CheckOutcome]:
    """``0 <= sigma_tilde <= alpha c_alpha(V)`` for the Schrödinger ground state."""
    gs = ground_state_schrodinger(mesh, V, seed=seed)
    ca = sg.c_alpha(mesh, V, alpha)
    scale = max(abs(alpha * ca), float(np.max(V)), 1.0)
    common = dict(digest=mesh.digest, seed=seed,
                  details={"c_alpha": ca, "alpha": float(alpha), "residual": gs.residual})
    return [
        leq("ground_state.nonnegative", 0.0, gs.sigma_tilde, abs_tol=tolerance * scale,
            tolerance=tolerance, anchor="0 <= sigma_tilde", **common),
        leq("ground_state.upper", gs.sigma_tilde, alpha * ca, tolerance=tolerance,
            abs_tol=tolerance * scale, anchor="sigma_tilde <= a c_a(V)", **common),
    ]
