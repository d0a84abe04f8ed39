"""Build script: compiles the optional clustering search kernels.

The package is fully functional without the extension (a pure-Python
twin is selected at import time); the build therefore degrades
gracefully when Cython or a C compiler is unavailable.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MPSDETECT_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "mpsdetect.cluster._kernels",
                    ["src/mpsdetect/cluster/_kernels.pyx"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
