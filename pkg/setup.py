import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the package still works on the numpy backend
    cythonize = None

openmp = [] if sys.platform == "darwin" or os.environ.get("GENACC_NO_OPENMP") else ["-fopenmp"]

ext_modules = []
if cythonize is not None and not os.environ.get("GENACC_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "genacc._ckernels",
                ["src/genacc/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"] + openmp,
                extra_link_args=openmp,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
