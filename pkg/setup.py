"""Build script: compiles the Cython simulation kernels.

The package works without the extension (a pure NumPy fallback is selected
at import time), so a failed extension build degrades performance only.
Build in place with:

    python setup.py build_ext --inplace
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "stabqubit.kernels._speedups",
                ["src/stabqubit/kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off keeps the compiled kernels bit-identical
                # to the NumPy reference backend (no FMA re-association).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
