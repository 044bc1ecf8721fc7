"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the NumPy
implementation is. Setting ``TCPR_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("TCPR_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
topk_cosine = _impl.topk_cosine
ncc_accuracy = _impl.ncc_accuracy
