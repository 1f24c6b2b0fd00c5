"""Backend selection for the hot loops.

The compiled module is used when it was built; ``FVDEGEN_PURE_PYTHON=1`` in
the environment forces the numpy fallback.
"""

import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("FVDEGEN_PURE_PYTHON"):
    backend = compiled_backend
    BACKEND = "cython"
else:
    backend = python_backend
    BACKEND = "python"

muscl_traces = backend.muscl_traces
fu_linear = backend.fu_linear
divergence = backend.divergence
