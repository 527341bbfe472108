"""Builds the optional compiled kernel extension.

The package works without it (a pure-numpy fallback is selected at import
time); build in place with

    python setup.py build_ext --inplace

or let pip build it during install. Set MONSTR_SKIP_EXT=1 to force a
pure-Python install.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MONSTR_SKIP_EXT", "0") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "monstr._kernels._core",
                    sources=["src/monstr/_kernels/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
