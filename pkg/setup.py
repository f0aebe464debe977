"""Builds the optional compiled kernels.

The package works without the extension (a NumPy/Python fallback is selected
at import time), so a failed extension build is not fatal for development
installs; run `python setup.py build_ext --inplace` to force a rebuild.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "evsnow._kernels",
                ["src/evsnow/_kernels.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
