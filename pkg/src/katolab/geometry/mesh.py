"""Triangulation of the model surfaces and P1 finite-element assembly.

All geometry is intrinsic: a mesh is a triangle list plus per-face edge
lengths. Mass is lumped (a third of each incident face area per vertex) and
stiffness uses cotangent weights, so ``u @ K @ u`` is the Dirichlet energy
of the piecewise-linear interpolant.
"""
from __future__ import annotations

import hashlib
import math

import numpy as np
import scipy.sparse as sps
from scipy import integrate

from .. import kernels
from .spec import ManifoldSpec, SpecError

TARGET_VERTICES = 4500


class DiscreteManifold:
    """Discrete stand-in for a compact surface.

    Attributes
    ----------
    n : int
        Intrinsic dimension.
    coords : (N, 2) ndarray
        Chart coordinates: ``(t, theta)`` on surfaces of revolution,
        ``(x, y)`` on the torus.
    mass : (N,) ndarray
        Lumped vertex areas.
    stiffness : (N, N) csr_matrix
        Weak Laplacian with natural boundary conditions.
    edges, edge_lengths, edge_weights : ndarray
        Unique undirected edges ``i < j`` with intrinsic length and the
        cotangent weight used in the stiffness matrix.
    faces, face_lengths : (F, 3) ndarray
        Triangles and the length of the edge opposite each corner.
    boundary : ndarray of int
        Boundary vertex indices (empty when closed).
    h : float
        Longest edge.
    """

    def __init__(self, coords, mass, edges, edge_lengths, edge_weights, faces,
                 face_lengths, boundary, h=None, spec=None, n=2, flips=0, clamped=0):
        self.n = int(n)
        self.spec = spec
        self.coords = _frozen(np.asarray(coords, dtype=float))
        self.mass = _frozen(np.asarray(mass, dtype=float))
        self.edges = _frozen(np.asarray(edges, dtype=np.int64))
        self.edge_lengths = _frozen(np.asarray(edge_lengths, dtype=float))
        self.edge_weights = _frozen(np.asarray(edge_weights, dtype=float))
        self.faces = _frozen(np.asarray(faces, dtype=np.int64))
        self.face_lengths = _frozen(np.asarray(face_lengths, dtype=float))
        self.boundary = _frozen(np.asarray(boundary, dtype=np.int64))
        self.h = float(self.edge_lengths.max()) if h is None else float(h)
        self.flips = int(flips)
        self.clamped = int(clamped)
        self.stiffness = stiffness_from_edges(self.N, self.edges, self.edge_weights)
        self._cache = {}

    @property
    def N(self) -> int:
        return self.mass.shape[0]

    @property
    def volume(self) -> float:
        return float(self.mass.sum())

    @property
    def closed(self) -> bool:
        return self.boundary.size == 0

    @property
    def mean_edge(self) -> float:
        return float(self.edge_lengths.mean())

    @property
    def digest(self) -> str:
        d = self._cache.get("digest")
        if d is None:
            hs = hashlib.sha256()
            for a in (self.mass, self.edges, self.edge_lengths, self.edge_weights,
                      self.faces, self.face_lengths, self.boundary):
                hs.update(np.ascontiguousarray(a).tobytes())
            d = self._cache["digest"] = hs.hexdigest()[:16]
        return d

    @property
    def vertex_faces(self):
        """CSR arrays ``(ptr, face, corner)`` of the faces around each vertex."""
        vf = self._cache.get("vf")
        if vf is None:
            flat = self.faces.ravel()
            order = np.argsort(flat, kind="stable")
            ptr = np.zeros(self.N + 1, dtype=np.int64)
            np.cumsum(np.bincount(flat, minlength=self.N), out=ptr[1:])
            vf = self._cache["vf"] = (ptr, (order // 3).astype(np.int32),
                                      (order % 3).astype(np.int8))
        return vf

    def face_areas(self):
        return _heron(self.face_lengths)

    def __repr__(self):
        name = self.spec.family if self.spec is not None else "mesh"
        return f"DiscreteManifold({name}, N={self.N}, h={self.h:.4g})"


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _heron(L):
    # Kahan's stable ordering
    s = np.sort(L, axis=1)[:, ::-1]
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(q, 0.0))


def cotangents(face_lengths):
    """Cotangent of the angle at each corner, shape (F, 3)."""
    L = face_lengths
    area = _heron(L)
    sq = L * L
    out = np.empty_like(L)
    for k in range(3):
        out[:, k] = (sq[:, (k + 1) % 3] + sq[:, (k + 2) % 3] - sq[:, k]) / (4.0 * area)
    return out


def stiffness_from_edges(N, edges, weights):
    """``K = D - W`` with the diagonal equal to the off-diagonal row sums."""
    i, j = edges[:, 0], edges[:, 1]
    W = sps.coo_matrix((np.concatenate([weights, weights]),
                        (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(N, N)).tocsr()
    W.sum_duplicates()
    W.sort_indices()
    diag = np.asarray(W.sum(axis=1)).ravel()
    K = (sps.diags(diag) - W).tocsr()
    K.sum_duplicates()
    K.sort_indices()
    return K


def half_edge_twins(faces, N):
    """Twin half-edge ``3*g + m`` for each ``(f, k)``, or -1 on the boundary."""
    F = faces.shape[0]
    a = np.concatenate([faces[:, 1], faces[:, 2], faces[:, 0]])
    b = np.concatenate([faces[:, 2], faces[:, 0], faces[:, 1]])
    he = np.concatenate([np.arange(F) * 3, np.arange(F) * 3 + 1, np.arange(F) * 3 + 2])
    key = a.astype(np.int64) * N + b
    rkey = b.astype(np.int64) * N + a
    order = np.argsort(key, kind="stable")
    sk = key[order]
    if np.any(sk[1:] == sk[:-1]):
        raise SpecError("triangulation is not a consistently oriented manifold")
    pos = np.searchsorted(sk, rkey)
    pos = np.minimum(pos, sk.size - 1)
    found = sk[pos] == rkey
    twins = np.full(3 * F, -1, dtype=np.int64)
    twins[he[found]] = he[order[pos[found]]]
    return twins.reshape(F, 3)


def unique_edges(faces):
    """Unique undirected edges and, per face corner, the index of the opposite edge."""
    F = faces.shape[0]
    a = np.stack([faces[:, 1], faces[:, 2], faces[:, 0]], axis=1)
    b = np.stack([faces[:, 2], faces[:, 0], faces[:, 1]], axis=1)
    lo = np.minimum(a, b).ravel()
    hi = np.maximum(a, b).ravel()
    pairs = np.stack([lo, hi], axis=1)
    edges, inv = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inv.reshape(F, 3)


def assemble(coords, faces, face_lengths, spec=None, m_matrix=True):
    """Build a :class:`DiscreteManifold` from an intrinsic triangulation.

    In M-matrix mode non-Delaunay interior edges are flipped first; any
    remaining negative cotangent weight (possible only on boundary edges) is
    clamped to zero.
    """
    N = coords.shape[0]
    faces = np.ascontiguousarray(faces, dtype=np.int32)
    face_lengths = np.ascontiguousarray(face_lengths, dtype=np.float64)
    flips = 0
    if m_matrix:
        twins = np.ascontiguousarray(half_edge_twins(faces, N), dtype=np.int64)
        flips = kernels.delaunay_flip(faces, face_lengths, twins)
        degenerate = ((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2])
                      | (faces[:, 0] == faces[:, 2]))
        if np.any(degenerate):
            raise SpecError("edge flipping produced a self-loop; refine the mesh")
    area = _heron(face_lengths)
    if np.any(area <= 0.0):
        raise SpecError("degenerate triangle (zero area) in triangulation")
    mass = np.zeros(N)
    np.add.at(mass, faces.ravel(), np.repeat(area / 3.0, 3))
    if np.any(mass <= 0.0):
        raise SpecError("vertex with zero mass (isolated vertex)")
    cot = cotangents(face_lengths)
    edges, opp = unique_edges(faces)
    E = edges.shape[0]
    weights = np.zeros(E)
    np.add.at(weights, opp.ravel(), 0.5 * cot.ravel())
    lengths = np.zeros(E)
    lengths[opp.ravel()] = face_lengths.ravel()
    clamped = 0
    if m_matrix:
        # roundoff-level negatives (right angles, flip tolerance) are not counted
        clamped = int(np.sum(weights < -1e-10 * np.abs(weights).max()))
        weights[weights < 0.0] = 0.0
    counts = np.bincount(opp.ravel(), minlength=E)
    bedges = edges[counts == 1]
    boundary = np.unique(bedges.ravel())
    return DiscreteManifold(coords, mass, edges, lengths, weights, faces, face_lengths,
                            boundary, spec=spec, flips=flips, clamped=clamped)


# -- generators ------------------------------------------------------------

def default_resolution(spec: ManifoldSpec, target=TARGET_VERTICES) -> float:
    """Resolution giving roughly ``target`` vertices."""
    return math.sqrt(spec.volume() / target)


def build_manifold(spec: ManifoldSpec, resolution=None, m_matrix=True) -> DiscreteManifold:
    """Discretize ``spec`` with edge lengths close to ``resolution``.

    Parameters
    ----------
    spec : ManifoldSpec
    resolution : float, optional
        Target edge length; defaults to :func:`default_resolution`.
    m_matrix : bool
        Enforce nonpositive off-diagonal stiffness (default True).
    """
    if not isinstance(spec, ManifoldSpec):
        raise SpecError("spec must be a ManifoldSpec")
    h = default_resolution(spec) if resolution is None else float(resolution)
    if not h > 0 or not math.isfinite(h):
        raise SpecError("resolution must be a positive finite number")
    if spec.is_torus:
        coords, faces, fl = _torus(spec.param("L1"), spec.param("L2"), h)
    else:
        coords, faces, fl = _revolution(spec, h)
    if coords.shape[0] < 50:
        raise SpecError(f"resolution {h:g} too coarse: {coords.shape[0]} < 50 vertices")
    return assemble(coords, faces, fl, spec=spec, m_matrix=m_matrix)


def _torus(L1, L2, h):
    # even counts so that antipodal points are vertices
    nx = max(4, 2 * int(round(L1 / (2.0 * h))))
    ny = max(4, 2 * int(round(L2 / (2.0 * h))))
    hx, hy = L1 / nx, L2 / ny
    hyp = math.hypot(hx, hy)
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    vid = lambda a, b: (a % nx) * ny + (b % ny)  # noqa: E731
    v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
    faces = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    n = i.size
    fl = np.concatenate([np.tile([hy, hyp, hx], (n, 1)), np.tile([hx, hy, hyp], (n, 1))])
    coords = np.stack([i * hx, j * hy], axis=1).astype(float)
    return coords, faces, fl


def _revolution(spec, h):
    f, t0, t1, kind = spec.revolution
    ell = t1 - t0
    nt = max(int(math.ceil(ell / h)), 3)
    ts = t0 + ell * np.arange(nt + 1) / nt
    ts[-1] = t1
    fv = f(ts)
    pole_lo = kind in ("closed", "capped")
    pole_hi = kind == "closed"

    rings = []  # (start index, count)
    coords = []
    nv = 0
    for k, t in enumerate(ts):
        is_pole = (k == 0 and pole_lo) or (k == nt and pole_hi)
        if is_pole:
            m = 1
            th = np.zeros(1)
        else:
            m = max(6, int(round(2.0 * math.pi * fv[k] / h)))
            th = 2.0 * math.pi * (np.arange(m) + 0.5 * (k % 2)) / m
        coords.append(np.stack([np.full(m, t), th], axis=1))
        rings.append((nv, m))
        nv += m
    coords = np.concatenate(coords)

    faces = []
    for k in range(nt):
        (sa, ma), (sb, mb) = rings[k], rings[k + 1]
        if ma == 1:
            A = sb + np.arange(mb)
            faces.append(np.stack([np.full(mb, sa), np.roll(A, -1), A], 1))
        elif mb == 1:
            A = sa + np.arange(ma)
            faces.append(np.stack([A, np.roll(A, -1), np.full(ma, sb)], 1))
        else:
            faces.append(_strip(coords[sa:sa + ma, 1], coords[sb:sb + mb, 1], sa, sb))
    faces = np.concatenate(faces).astype(np.int64)

    # height function of the (possibly Lorentzian) embedding
    z = np.zeros(nt + 1)
    g = lambda s: math.sqrt(abs(1.0 - float(f(s, 1)) ** 2))  # noqa: E731
    for k in range(nt):
        z[k + 1] = z[k] + integrate.quad(g, ts[k], ts[k + 1], limit=100, epsabs=1e-14)[0]
    ring_of = np.repeat(np.arange(nt + 1), [m for _, m in rings])

    edges, opp = unique_edges(faces)
    a, b = edges[:, 0], edges[:, 1]
    ka, kb = ring_of[a], ring_of[b]
    fa, fb = fv[ka], fv[kb]
    dth = np.abs(coords[a, 1] - coords[b, 1])
    dth = np.minimum(dth, 2.0 * math.pi - dth)
    tmid = 0.5 * (ts[ka] + ts[kb])
    sgn = np.sign(1.0 - f(tmid, 1) ** 2)
    dz = z[kb] - z[ka]
    L2 = (fa - fb) ** 2 + 4.0 * fa * fb * np.sin(0.5 * dth) ** 2 + sgn * dz * dz
    bad = L2 <= 0.0
    if np.any(bad):
        L2[bad] = [_param_length(f, ts[p], ts[q], d) ** 2
                   for p, q, d in zip(ka[bad], kb[bad], dth[bad])]
    lengths = np.sqrt(L2)
    return coords, faces, lengths[opp]


def _param_length(f, ta, tb, dth):
    def speed(s):
        t = ta + s * (tb - ta)
        return math.sqrt((tb - ta) ** 2 + (float(f(t)) * dth) ** 2)
    return integrate.quad(speed, 0.0, 1.0)[0]


def _strip(a, b, sa, sb):
    """Triangulate the band between ring ``a`` (lower) and ring ``b`` (upper).

    Vertices are merged in order of unwrapped angle; faces are oriented
    counterclockwise in the ``(theta, t)`` chart.
    """
    ma, mb = a.size, b.size
    two_pi = 2.0 * math.pi
    # start on the upper ring at the largest angle not exceeding a[0]
    le = np.nonzero(b <= a[0])[0]
    j0 = int(le[-1]) if le.size else mb - 1
    bu = b[(j0 + np.arange(mb + 1)) % mb].copy()
    bu[0] = b[j0] if b[j0] <= a[0] else b[j0] - two_pi
    for j in range(1, mb + 1):
        while bu[j] <= bu[j - 1]:
            bu[j] += two_pi
    au = np.concatenate([a, [a[0] + two_pi]])
    out = np.empty((ma + mb, 3), dtype=np.int64)
    ia = jb = 0
    for n in range(ma + mb):
        A_i = sa + ia % ma
        B_j = sb + (j0 + jb) % mb
        if ia < ma and (jb == mb or au[ia + 1] <= bu[jb + 1]):
            out[n] = (A_i, sa + (ia + 1) % ma, B_j)
            ia += 1
        else:
            out[n] = (A_i, sb + (j0 + jb + 1) % mb, B_j)
            jb += 1
    return out
