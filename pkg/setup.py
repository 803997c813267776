import os

from setuptools import setup

# The graph kernels ship as an optional Cython extension. When Cython (or a C
# compiler) is unavailable, the install proceeds and the package falls back to
# the pure-Python kernels at import time.
ext_modules = []
if os.environ.get("PHOENIXSEN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "phoenixsen.kernels._graphcore",
                    ["src/phoenixsen/kernels/_graphcore.pyx"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
