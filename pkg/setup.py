import os

import numpy
from setuptools import Extension, setup

# The compiled kernels are an optional accelerator: the package falls back to
# the numpy implementation at import time if the extension is absent.
# Set SLLBFEM_NO_EXT=1 to skip compilation entirely.
if os.environ.get("SLLBFEM_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sllbfem._kernels_cy",
                ["src/sllbfem/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
