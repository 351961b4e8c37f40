"""Build script: compiles the optional Cython convolution kernels.

If Cython or a C compiler is unavailable the package still installs; the
numpy fallback is selected at import time.
"""

import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize

    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "langground.nn._kernels_cy",
                ["src/langground/nn/_kernels_cy.pyx"],
                extra_compile_args=["-O3", "-funroll-loops"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[np.get_include()],
)
