import os

import numpy
from setuptools import Extension, setup

# OOBCI_NO_EXT=1 installs the pure-Python fallback only.
ext_modules = []
if not os.environ.get("OOBCI_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "oobci._core",
                ["src/oobci/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
