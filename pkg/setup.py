"""Build script for the optional compiled kernels.

The extension is marked optional: if the compiler or Cython is missing the
package still installs and falls back to the numpy kernels at import time.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "fvdegen._ckernels",
                ["src/fvdegen/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # no fast-math / FMA contraction: results must match the numpy path bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
