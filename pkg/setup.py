"""Builds the compiled advection kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a missing Cython or a failed compile should not block a
source install: `DRIFTLAB_NO_EXT=1 pip install .` skips the extension.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("DRIFTLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "driftlab._kernels",
                    ["src/driftlab/_kernels.pyx"],
                    # -ffp-contract=off: the kernel must stay bit-identical to
                    # the numpy fallback, so the compiler may not fuse a*b+c
                    # into FMA instructions.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
