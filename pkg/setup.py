"""Build script for the optional compiled quote kernel.

The package works without the extension (a pure-Python kernel is selected
at import time); set EVAUCTION_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("EVAUCTION_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "evauction._quote_cy",
                    ["src/evauction/_quote_cy.pyx"],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
