"""Backend selection for the hot kernels.

The compiled extension ``katolab._core`` is used when importable; otherwise
the pure-Python twin ``katolab._core_py`` is used. Setting the environment
variable ``KATOLAB_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _core_py

BACKEND = "python"
_impl = _core_py

if os.environ.get("KATOLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _core_py

fmm_distances = _impl.fmm_distances
fmm_eccentricities = _impl.fmm_eccentricities
delaunay_flip = _impl.delaunay_flip


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _core_py
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
