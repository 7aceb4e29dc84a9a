"""Backend selection for the successive-cancellation kernels.

The compiled extension is used when importable; setting the environment
variable ``TSAPOLAR_PURE_PYTHON=1`` before import forces the numpy fallback.
Both backends expose ``genie_llrs``, ``sc_encode``, ``sc_decode`` and
``scl_decode`` with identical signatures.
"""

import os

from . import _pykernels

FROZEN, DATA, SHAPING = _pykernels.FROZEN, _pykernels.DATA, _pykernels.SHAPING

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("TSAPOLAR_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass

genie_llrs = _impl.genie_llrs
sc_encode = _impl.sc_encode
sc_decode = _impl.sc_decode
scl_decode = _impl.scl_decode
