"""Build script for the optional compiled APDU scanner.

The package is fully functional without the extension (a pure-Python
scanner is selected at import time); set GOOSEWATCH_NO_EXT=1 to skip the
build explicitly, e.g. on platforms without a C toolchain.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GOOSEWATCH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("goosewatch._scan_c", ["src/goosewatch/_scan_c.pyx"])],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
