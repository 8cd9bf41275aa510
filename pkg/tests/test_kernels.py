import os
import subprocess
import sys

import numpy as np
import pytest

from katolab import kernels
from katolab.geometry import build_manifold, flat_torus, planar_disk, round_sphere
from katolab.geometry.mesh import half_edge_twins
from katolab.geometry.metric import _kernel_args

try:
    compiled = kernels.get_backend("compiled")
except ImportError:  # extension not built
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled core not built")
PY = kernels.get_backend("python")


@pytest.fixture(scope="module", params=[round_sphere(), planar_disk(), flat_torus()])
def meshes(request):
    h = 0.45 if request.param.family == "flat_torus" else 0.25
    return (build_manifold(request.param, h, m_matrix=False),
            build_manifold(request.param, h))


@needs_compiled
def test_fmm_backends_agree(meshes):
    _, m = meshes
    src = np.array([0, m.N // 2, m.N - 1], dtype=np.int64)
    args = _kernel_args(m)
    a = compiled.fmm_distances(*args, src, m.N)
    b = PY.fmm_distances(*args, src, m.N)
    assert np.allclose(a, b, rtol=1e-12, atol=0)
    ea, fa = compiled.fmm_eccentricities(*args, src, m.N)
    eb, fb = PY.fmm_eccentricities(*args, src, m.N)
    assert np.allclose(ea, eb, rtol=1e-12, atol=0) and np.array_equal(fa, fb)


@needs_compiled
def test_flip_backends_agree(meshes):
    raw, _ = meshes
    twins = np.ascontiguousarray(half_edge_twins(raw.faces, raw.N), dtype=np.int64)
    out = []
    for be in (compiled, PY):
        f = np.ascontiguousarray(raw.faces, dtype=np.int32).copy()
        fl = raw.face_lengths.copy()
        tw = twins.copy()
        n = be.delaunay_flip(f, fl, tw)
        out.append((n, f, fl))
    assert out[0][0] == out[1][0]
    assert np.array_equal(out[0][1], out[1][1])
    assert np.allclose(out[0][2], out[1][2], rtol=1e-12, atol=0)


def test_distances_start_at_zero(meshes):
    _, m = meshes
    d = kernels.fmm_distances(*_kernel_args(m), np.array([3], dtype=np.int64), m.N)[0]
    assert d[3] == 0.0 and np.all(d[np.arange(m.N) != 3] > 0)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_pure_python_fallback():
    env = dict(os.environ, KATOLAB_PURE_PYTHON="1")
    code = ("from katolab import kernels; from katolab.geometry import build_manifold, "
            "round_sphere, diameter; m = build_manifold(round_sphere(), 0.4); "
            "print(kernels.BACKEND, round(diameter(m), 6))")
    r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    backend, D = r.stdout.split()
    assert backend == "python"
    from katolab.geometry import diameter
    assert float(D) == round(diameter(build_manifold(round_sphere(), 0.4)), 6)


@needs_compiled
def test_compiled_is_default():
    if os.environ.get("KATOLAB_PURE_PYTHON") not in ("1", "true", "yes"):
        assert kernels.BACKEND == "compiled"
