"""Build script for the compiled word-parallel kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.  Set BITCIRCUIT_NO_EXT=1
to skip building it on purpose.
"""

import os

from setuptools import Extension, setup

DIRECTIVES = {
    "language_level": "3",
    "boundscheck": False,
    "wraparound": False,
    "initializedcheck": False,
    "cdivision": True,
}


def extensions():
    if os.environ.get("BITCIRCUIT_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "bitcircuit._kernels",
        sources=["src/bitcircuit/_kernels.pyx"],
        extra_compile_args=["-O3", "-mpopcnt", "-funroll-loops"],
    )
    return cythonize([ext], compiler_directives=DIRECTIVES)


setup(ext_modules=extensions())
