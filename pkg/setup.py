"""Builds the optional compiled kernels.

The package works without them (a pure numpy fallback is selected at import
time), so a failed extension build only costs speed.
"""

import os

from setuptools import Extension, setup

PYX = "src/inkrec/_ckernels.pyx"

try:
    import numpy
    from Cython.Build import cythonize

    if os.path.exists(PYX):
        extensions = cythonize(
            [
                Extension(
                    "inkrec._ckernels",
                    [PYX],
                    include_dirs=[numpy.get_include()],
                    define_macros=[
                        ("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")
                    ],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    else:
        extensions = []
except ImportError:
    extensions = []

setup(ext_modules=extensions)
