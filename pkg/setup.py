"""Build the optional compiled kernels.

The package works without them: ``katolab.kernels`` falls back to the
pure-Python implementation when ``katolab._core`` cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - fallback-only install
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("KATOLAB_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "katolab._core",
                ["src/katolab/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
