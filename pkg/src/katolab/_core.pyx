# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fast marching distances and intrinsic edge flips.

Operation-for-operation twin of ``_core_py``; see that module for the
mesh conventions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, acos, cos, INFINITY

cnp.import_array()

cdef enum:
    FAR = 0
    TRIAL = 1
    KNOWN = 2


cdef inline bint _less(double k1, long v1, double k2, long v2) noexcept nogil:
    return k1 < k2 or (k1 == k2 and v1 < v2)


cdef struct Heap:
    double *key
    long *val
    long size
    long cap


cdef inline void _heap_push(Heap *h, double k, long v) noexcept nogil:
    cdef long i = h.size
    cdef long parent
    h.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _less(k, v, h.key[parent], h.val[parent]):
            h.key[i] = h.key[parent]
            h.val[i] = h.val[parent]
            i = parent
        else:
            break
    h.key[i] = k
    h.val[i] = v


cdef inline void _heap_pop(Heap *h, double *k, long *v) noexcept nogil:
    cdef long i = 0
    cdef long child
    cdef double lk
    cdef long lv
    k[0] = h.key[0]
    v[0] = h.val[0]
    h.size -= 1
    if h.size == 0:
        return
    lk = h.key[h.size]
    lv = h.val[h.size]
    while True:
        child = 2 * i + 1
        if child >= h.size:
            break
        if child + 1 < h.size and _less(h.key[child + 1], h.val[child + 1], h.key[child], h.val[child]):
            child += 1
        if _less(h.key[child], h.val[child], lk, lv):
            h.key[i] = h.key[child]
            h.val[i] = h.val[child]
            i = child
        else:
            break
    h.key[i] = lk
    h.val[i] = lv


cdef inline double _two_point(double da, double db, double e_ab, double e_ac, double e_bc) noexcept nogil:
    cdef double cx, cy2, cy, sx, sy2, sy, s, xi, dx, dy
    cx = (e_ab * e_ab + e_ac * e_ac - e_bc * e_bc) / (2.0 * e_ab)
    cy2 = e_ac * e_ac - cx * cx
    cy = sqrt(cy2) if cy2 > 0.0 else 0.0
    sx = (da * da - db * db + e_ab * e_ab) / (2.0 * e_ab)
    sy2 = da * da - sx * sx
    if sy2 <= 0.0:
        return INFINITY
    sy = -sqrt(sy2)
    s = -sy / (cy - sy)
    xi = sx + s * (cx - sx)
    if xi < 0.0 or xi > e_ab:
        return INFINITY
    dx = cx - sx
    dy = cy - sy
    return sqrt(dx * dx + dy * dy)


cdef void _fmm_one(const int[:, ::1] faces, const double[:, ::1] lengths,
                   const long[::1] vf_ptr, const int[::1] vf_face, const signed char[::1] vf_corner,
                   long source, double[::1] dist, signed char[::1] state, Heap *heap) noexcept nogil:
    cdef long nv = dist.shape[0]
    cdef long i, p, v, w, o, f
    cdef int cv, cw, co, step
    cdef double key, dv, e_vw, e_vo, e_ow, cand, c2, c3
    for i in range(nv):
        dist[i] = INFINITY
        state[i] = FAR
    heap.size = 0
    dist[source] = 0.0
    state[source] = TRIAL
    _heap_push(heap, 0.0, source)
    while heap.size > 0:
        _heap_pop(heap, &key, &v)
        if state[v] == KNOWN or key > dist[v]:
            continue
        state[v] = KNOWN
        dv = dist[v]
        for p in range(vf_ptr[v], vf_ptr[v + 1]):
            f = vf_face[p]
            cv = vf_corner[p]
            for step in range(1, 3):
                cw = (cv + step) % 3
                co = (cv + 3 - step) % 3
                w = faces[f, cw]
                if state[w] == KNOWN:
                    continue
                o = faces[f, co]
                e_vw = lengths[f, co]
                cand = dv + e_vw
                if state[o] == KNOWN:
                    e_vo = lengths[f, cw]
                    e_ow = lengths[f, cv]
                    c2 = dist[o] + e_ow
                    if c2 < cand:
                        cand = c2
                    c3 = _two_point(dv, dist[o], e_vo, e_vw, e_ow)
                    if c3 < cand:
                        cand = c3
                if cand < dist[w]:
                    dist[w] = cand
                    state[w] = TRIAL
                    _heap_push(heap, cand, w)


def _prep(faces, lengths, vf_ptr, vf_face, vf_corner):
    return (np.ascontiguousarray(faces, dtype=np.intc),
            np.ascontiguousarray(lengths, dtype=np.float64),
            np.ascontiguousarray(vf_ptr, dtype=np.int_),
            np.ascontiguousarray(vf_face, dtype=np.intc),
            np.ascontiguousarray(vf_corner, dtype=np.int8))


def fmm_distances(faces, lengths, vf_ptr, vf_face, vf_corner, sources, long nv):
    """Fast-marching distances from each source; returns an (S, N) array."""
    cdef const int[:, ::1] F
    cdef const double[:, ::1] L
    cdef const long[::1] P
    cdef const int[::1] VF
    cdef const signed char[::1] VC
    F, L, P, VF, VC = _prep(faces, lengths, vf_ptr, vf_face, vf_corner)
    cdef const long[::1] src = np.ascontiguousarray(sources, dtype=np.int_)
    cdef long ns = src.shape[0]
    out = np.empty((ns, nv))
    cdef double[:, ::1] O = out
    cdef signed char[::1] state = np.empty(nv, dtype=np.int8)
    cdef long cap = 6 * F.shape[0] + 2 * nv + 16
    key_buf = np.empty(cap)
    val_buf = np.empty(cap, dtype=np.int_)
    cdef double[::1] kb = key_buf
    cdef long[::1] vb = val_buf
    cdef Heap heap
    heap.key = &kb[0]
    heap.val = &vb[0]
    heap.cap = cap
    cdef long i
    with nogil:
        for i in range(ns):
            _fmm_one(F, L, P, VF, VC, src[i], O[i], state, &heap)
    return out


def fmm_eccentricities(faces, lengths, vf_ptr, vf_face, vf_corner, sources, long nv):
    """Largest fast-marching distance from each source and where it occurs."""
    cdef const int[:, ::1] F
    cdef const double[:, ::1] L
    cdef const long[::1] P
    cdef const int[::1] VF
    cdef const signed char[::1] VC
    F, L, P, VF, VC = _prep(faces, lengths, vf_ptr, vf_face, vf_corner)
    cdef const long[::1] src = np.ascontiguousarray(sources, dtype=np.int_)
    cdef long ns = src.shape[0]
    ecc = np.empty(ns)
    far = np.empty(ns, dtype=np.int64)
    cdef double[::1] E = ecc
    cdef long long[::1] FA = far
    cdef double[::1] dist = np.empty(nv)
    cdef signed char[::1] state = np.empty(nv, dtype=np.int8)
    cdef long cap = 6 * F.shape[0] + 2 * nv + 16
    key_buf = np.empty(cap)
    val_buf = np.empty(cap, dtype=np.int_)
    cdef double[::1] kb = key_buf
    cdef long[::1] vb = val_buf
    cdef Heap heap
    heap.key = &kb[0]
    heap.val = &vb[0]
    heap.cap = cap
    cdef long i, j, best_j
    cdef double best
    with nogil:
        for i in range(ns):
            _fmm_one(F, L, P, VF, VC, src[i], dist, state, &heap)
            best = -1.0
            best_j = 0
            for j in range(nv):
                if dist[j] > best:
                    best = dist[j]
                    best_j = j
            E[i] = best
            FA[i] = best_j
    return ecc, far


cdef inline double _area(double a, double b, double c) noexcept nogil:
    cdef double s = 0.5 * (a + b + c)
    cdef double q = s * (s - a) * (s - b) * (s - c)
    return sqrt(q) if q > 0.0 else 0.0


cdef inline double _angle(double opp, double s1, double s2) noexcept nogil:
    cdef double c = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    return acos(c)


def delaunay_flip(faces, lengths, twins, double tol=1e-12, long max_flips=10_000_000):
    """Flip non-Delaunay interior edges in place until none remain.

    Arrays must be C-contiguous with dtypes int32 / float64 / int64.
    Returns the number of flips performed.
    """
    cdef int[:, ::1] F = faces
    cdef double[:, ::1] L = lengths
    cdef long long[:, ::1] T = twins
    cdef long nf = F.shape[0]
    cdef long long[::1] Tf = twins.reshape(-1)
    cdef unsigned char[::1] in_queue = np.zeros(3 * nf, dtype=np.uint8)
    stack_arr = np.empty(3 * nf + 16, dtype=np.int64)
    cdef long long[::1] stack = stack_arr
    cdef long top = 0
    cdef long cap = stack.shape[0]
    cdef long h, t, f, k, g, m, hh, own, other, key, flips = 0
    cdef int p, a, b, q, idx
    cdef double l_ab, l_bp, l_pa, l_aq, l_qb, af, ag, cot_p, cot_q, theta, l_pq2, l_pq
    cdef long long o_pa, o_bp, o_aq, o_qb
    cdef long owns[4]
    for h in range(3 * nf - 1, -1, -1):
        t = Tf[h]
        if t >= 0 and h < t:
            stack[top] = h
            top += 1
            in_queue[h] = 1
    while top > 0:
        top -= 1
        h = stack[top]
        in_queue[h] = 0
        t = Tf[h]
        if t < 0:
            continue
        f = h // 3
        k = h % 3
        g = t // 3
        m = t % 3
        l_ab = L[f, k]
        l_bp = L[f, (k + 1) % 3]
        l_pa = L[f, (k + 2) % 3]
        l_aq = L[g, (m + 1) % 3]
        l_qb = L[g, (m + 2) % 3]
        af = _area(l_ab, l_bp, l_pa)
        ag = _area(l_ab, l_aq, l_qb)
        if af <= 0.0 or ag <= 0.0:
            continue
        cot_p = (l_pa * l_pa + l_bp * l_bp - l_ab * l_ab) / (4.0 * af)
        cot_q = (l_aq * l_aq + l_qb * l_qb - l_ab * l_ab) / (4.0 * ag)
        if cot_p + cot_q >= -tol:
            continue
        if flips >= max_flips:
            raise RuntimeError("edge flipping did not terminate")
        p = F[f, k]
        a = F[f, (k + 1) % 3]
        b = F[f, (k + 2) % 3]
        q = F[g, m]
        theta = _angle(l_bp, l_pa, l_ab) + _angle(l_qb, l_aq, l_ab)
        l_pq2 = l_pa * l_pa + l_aq * l_aq - 2.0 * l_pa * l_aq * cos(theta)
        l_pq = sqrt(l_pq2) if l_pq2 > 0.0 else 0.0
        o_pa = T[f, (k + 2) % 3]
        o_bp = T[f, (k + 1) % 3]
        o_aq = T[g, (m + 1) % 3]
        o_qb = T[g, (m + 2) % 3]
        F[f, 0] = p
        F[f, 1] = a
        F[f, 2] = q
        F[g, 0] = q
        F[g, 1] = b
        F[g, 2] = p
        L[f, 0] = l_aq
        L[f, 1] = l_pq
        L[f, 2] = l_pa
        L[g, 0] = l_bp
        L[g, 1] = l_pq
        L[g, 2] = l_qb
        T[f, 0] = o_aq
        T[f, 1] = 3 * g + 1
        T[f, 2] = o_pa
        T[g, 0] = o_bp
        T[g, 1] = 3 * f + 1
        T[g, 2] = o_qb
        if o_aq >= 0:
            Tf[o_aq] = 3 * f
        if o_pa >= 0:
            Tf[o_pa] = 3 * f + 2
        if o_bp >= 0:
            Tf[o_bp] = 3 * g
        if o_qb >= 0:
            Tf[o_qb] = 3 * g + 2
        for hh in range(3):
            in_queue[3 * f + hh] = 0
            in_queue[3 * g + hh] = 0
        owns[0] = 3 * f
        owns[1] = 3 * f + 2
        owns[2] = 3 * g
        owns[3] = 3 * g + 2
        for idx in range(4):
            own = owns[idx]
            other = Tf[own]
            if other < 0:
                continue
            key = own if own < other else other
            if not in_queue[key]:
                in_queue[key] = 1
                if top >= cap:
                    cap = 2 * cap
                    stack_arr = np.resize(stack_arr, cap)
                    stack = stack_arr
                stack[top] = key
                top += 1
        flips += 1
    return flips
