"""Hot kernels: compiled extension when built, NumPy fallback otherwise.

Set ``CHIPLETCOST_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("CHIPLETCOST_PURE"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

gather_scan = _impl.gather_scan
op_grid_search = _impl.op_grid_search

__all__ = ["BACKEND", "gather_scan", "op_grid_search"]
