"""Pure-Python reference implementation of the hot kernels.

Mirrors ``_core.pyx`` operation for operation so both backends give the
same numbers up to floating-point identity. Slow; used when the compiled
extension is unavailable or ``KATOLAB_PURE_PYTHON=1`` is set.

Mesh conventions shared by both backends
----------------------------------------
``faces[f, k]`` is the vertex at corner ``k`` of face ``f``;
``lengths[f, k]`` is the intrinsic length of the edge opposite that corner;
``twins[f, k]`` encodes the neighbouring half-edge as ``3 * g + m`` or -1 on
the boundary. Faces are consistently oriented.
"""
import heapq
import math

import numpy as np

FAR, TRIAL, KNOWN = 0, 1, 2


def _two_point(da, db, e_ab, e_ac, e_bc):
    """Planar virtual-source update of vertex c from known a and b.

    Returns inf when the straight ray from the virtual source does not
    cross the segment ab.
    """
    cx = (e_ab * e_ab + e_ac * e_ac - e_bc * e_bc) / (2.0 * e_ab)
    cy2 = e_ac * e_ac - cx * cx
    cy = math.sqrt(cy2) if cy2 > 0.0 else 0.0
    sx = (da * da - db * db + e_ab * e_ab) / (2.0 * e_ab)
    sy2 = da * da - sx * sx
    if sy2 <= 0.0:
        return math.inf
    sy = -math.sqrt(sy2)
    s = -sy / (cy - sy)
    xi = sx + s * (cx - sx)
    if xi < 0.0 or xi > e_ab:
        return math.inf
    dx = cx - sx
    dy = cy - sy
    return math.sqrt(dx * dx + dy * dy)


def _fmm_one(faces, lengths, vf_ptr, vf_face, vf_corner, source, nv):
    dist = [math.inf] * nv
    state = [FAR] * nv
    dist[source] = 0.0
    state[source] = TRIAL
    heap = [(0.0, source)]
    while heap:
        key, v = heapq.heappop(heap)
        if state[v] == KNOWN or key > dist[v]:
            continue
        state[v] = KNOWN
        dv = dist[v]
        for p in range(vf_ptr[v], vf_ptr[v + 1]):
            f = vf_face[p]
            cv = vf_corner[p]
            for step in (1, 2):
                cw = (cv + step) % 3
                co = (cv + 3 - step) % 3
                w = faces[f][cw]
                if state[w] == KNOWN:
                    continue
                o = faces[f][co]
                # lengths opposite: |v w| opposite co, |v o| opposite cw, |o w| opposite cv
                e_vw = lengths[f][co]
                cand = dv + e_vw
                if state[o] == KNOWN:
                    e_vo = lengths[f][cw]
                    e_ow = lengths[f][cv]
                    c2 = dist[o] + e_ow
                    if c2 < cand:
                        cand = c2
                    c3 = _two_point(dv, dist[o], e_vo, e_vw, e_ow)
                    if c3 < cand:
                        cand = c3
                if cand < dist[w]:
                    dist[w] = cand
                    state[w] = TRIAL
                    heapq.heappush(heap, (cand, w))
    return dist


def fmm_distances(faces, lengths, vf_ptr, vf_face, vf_corner, sources, nv):
    """Fast-marching distances from each source; returns an (S, N) array."""
    fl = faces.tolist()
    ll = lengths.tolist()
    ptr = vf_ptr.tolist()
    vff = vf_face.tolist()
    vfc = vf_corner.tolist()
    out = np.empty((len(sources), nv))
    for i, s in enumerate(sources):
        out[i] = _fmm_one(fl, ll, ptr, vff, vfc, int(s), nv)
    return out


def fmm_eccentricities(faces, lengths, vf_ptr, vf_face, vf_corner, sources, nv):
    """Largest fast-marching distance from each source and where it occurs."""
    fl = faces.tolist()
    ll = lengths.tolist()
    ptr = vf_ptr.tolist()
    vff = vf_face.tolist()
    vfc = vf_corner.tolist()
    ecc = np.empty(len(sources))
    far = np.empty(len(sources), dtype=np.int64)
    for i, s in enumerate(sources):
        d = _fmm_one(fl, ll, ptr, vff, vfc, int(s), nv)
        j = int(np.argmax(d))
        ecc[i] = d[j]
        far[i] = j
    return ecc, far


def _area(a, b, c):
    s = 0.5 * (a + b + c)
    q = s * (s - a) * (s - b) * (s - c)
    return math.sqrt(q) if q > 0.0 else 0.0


def _cot_opposite(opp, s1, s2, area):
    return (s1 * s1 + s2 * s2 - opp * opp) / (4.0 * area)


def _angle(opp, s1, s2):
    c = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)
    return math.acos(min(1.0, max(-1.0, c)))


def delaunay_flip(faces, lengths, twins, tol=1e-12, max_flips=10_000_000):
    """Flip non-Delaunay interior edges in place until none remain.

    An edge is non-Delaunay when the cotangents of its two opposite angles
    sum below ``-tol``. Returns the number of flips performed.
    """
    nf = faces.shape[0]
    in_queue = np.zeros(3 * nf, dtype=bool)
    stack = []
    for h in range(3 * nf - 1, -1, -1):
        t = twins.flat[h]
        if t >= 0 and h < t:
            stack.append(h)
            in_queue[h] = True
    flips = 0
    while stack:
        h = stack.pop()
        in_queue[h] = False
        t = int(twins.flat[h])
        if t < 0:
            continue
        f, k = divmod(h, 3)
        g, m = divmod(t, 3)
        l_ab = lengths[f, k]
        l_bp = lengths[f, (k + 1) % 3]
        l_pa = lengths[f, (k + 2) % 3]
        l_aq = lengths[g, (m + 1) % 3]
        l_qb = lengths[g, (m + 2) % 3]
        af = _area(l_ab, l_bp, l_pa)
        ag = _area(l_ab, l_aq, l_qb)
        if af <= 0.0 or ag <= 0.0:
            continue
        cot_p = _cot_opposite(l_ab, l_pa, l_bp, af)
        cot_q = _cot_opposite(l_ab, l_aq, l_qb, ag)
        if cot_p + cot_q >= -tol:
            continue
        if flips >= max_flips:
            raise RuntimeError("edge flipping did not terminate")
        p = faces[f, k]
        a = faces[f, (k + 1) % 3]
        b = faces[f, (k + 2) % 3]
        q = faces[g, m]
        theta = _angle(l_bp, l_pa, l_ab) + _angle(l_qb, l_aq, l_ab)
        l_pq2 = l_pa * l_pa + l_aq * l_aq - 2.0 * l_pa * l_aq * math.cos(theta)
        l_pq = math.sqrt(l_pq2) if l_pq2 > 0.0 else 0.0
        # outer half-edges before the flip
        o_pa = int(twins[f, (k + 2) % 3])
        o_bp = int(twins[f, (k + 1) % 3])
        o_aq = int(twins[g, (m + 1) % 3])
        o_qb = int(twins[g, (m + 2) % 3])
        # f' = (p, a, q), g' = (q, b, p)
        faces[f, 0], faces[f, 1], faces[f, 2] = p, a, q
        faces[g, 0], faces[g, 1], faces[g, 2] = q, b, p
        lengths[f, 0], lengths[f, 1], lengths[f, 2] = l_aq, l_pq, l_pa
        lengths[g, 0], lengths[g, 1], lengths[g, 2] = l_bp, l_pq, l_qb
        twins[f, 0] = o_aq
        twins[f, 1] = 3 * g + 1
        twins[f, 2] = o_pa
        twins[g, 0] = o_bp
        twins[g, 1] = 3 * f + 1
        twins[g, 2] = o_qb
        for own, other in ((3 * f, o_aq), (3 * f + 2, o_pa), (3 * g, o_bp), (3 * g + 2, o_qb)):
            if other >= 0:
                twins.flat[other] = own
        # in-queue flags were keyed by the old half-edge slots; re-key them
        for hh in (3 * f, 3 * f + 1, 3 * f + 2, 3 * g, 3 * g + 1, 3 * g + 2):
            in_queue[hh] = False
        for own in (3 * f, 3 * f + 2, 3 * g, 3 * g + 2):
            other = int(twins.flat[own])
            if other < 0:
                continue
            key = own if own < other else other
            if not in_queue[key]:
                in_queue[key] = True
                stack.append(key)
        flips += 1
    return flips
