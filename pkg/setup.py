"""Build script for the compiled sweep kernels.

The package works without the extension (a pure-Python fallback is selected
at import time), but the compiled kernels are strongly recommended: Gibbs
sweeps dominate the runtime of every experiment.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "csmci._kernels",
        ["src/csmci/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
