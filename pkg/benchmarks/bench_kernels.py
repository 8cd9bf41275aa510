"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--resolution H] [--sources S] [--repeat R]

Times fast-marching distances, eccentricities and intrinsic Delaunay flips on
the unit sphere and checks that both backends return identical results.
"""
import argparse
import time

import numpy as np

from katolab.geometry.mesh import build_manifold, half_edge_twins
from katolab.geometry.metric import _kernel_args
from katolab.geometry.spec import round_sphere
from katolab.kernels import get_backend


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-12, atol=0))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--resolution", type=float, default=0.08)
    p.add_argument("--sources", type=int, default=4)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    raw = build_manifold(round_sphere(), args.resolution, m_matrix=False)
    mesh = build_manifold(round_sphere(), args.resolution)
    src = np.linspace(0, mesh.N - 1, args.sources).astype(np.int64)
    fargs = _kernel_args(mesh)
    twins = np.ascontiguousarray(half_edge_twins(raw.faces, raw.N), dtype=np.int64)

    def flips(be):
        f = np.ascontiguousarray(raw.faces, dtype=np.int32).copy()
        fl = raw.face_lengths.copy()
        tw = twins.copy()
        n = be.delaunay_flip(f, fl, tw)
        return n, f, fl

    cases = {
        "fmm_distances": lambda be: be.fmm_distances(*fargs, src, mesh.N),
        "fmm_eccentricities": lambda be: be.fmm_eccentricities(*fargs, src, mesh.N),
        "delaunay_flip": flips,
    }
    print(f"unit sphere, N = {mesh.N}, {args.sources} sources, best of {args.repeat}")
    print(f"{'kernel':20s} {'compiled [s]':>13s} {'python [s]':>11s} {'speedup':>8s} same")
    for name, fn in cases.items():
        tc, oc = best_of(lambda: fn(get_backend("compiled")), args.repeat)
        tp, op = best_of(lambda: fn(get_backend("python")), 1)
        print(f"{name:20s} {tc:13.4f} {tp:11.4f} {tp / tc:8.1f} {same(oc, op)}")


if __name__ == "__main__":
    main()
