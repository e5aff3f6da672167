"""Build the optional Cython kernels; the package falls back to numpy without them."""

import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("ECGBO_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "ecgbo._kernels",
                    ["src/ecgbo/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": 3, "embedsignature": True},
        )
    except ImportError as exc:
        print(f"skipping compiled kernels: {exc}", file=sys.stderr)

setup(ext_modules=ext_modules)
