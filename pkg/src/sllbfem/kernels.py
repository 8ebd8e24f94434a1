"""Backend selection for the hot assembly kernels.

The compiled Cython extension is used when it imported successfully; the
numpy implementation is the fallback.  Set ``SLLBFEM_PURE_PYTHON=1`` in the
environment to force the fallback (useful for benchmarking and debugging).
"""

import os

from . import _kernels_py

if os.environ.get("SLLBFEM_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_cy as _impl
    except ImportError:
        _impl = _kernels_py

backend_name = _impl.backend_name
eval_p1 = _impl.eval_p1
load_vector = _impl.load_vector
pair_integrals = _impl.pair_integrals
conv_pair_integrals = _impl.conv_pair_integrals
