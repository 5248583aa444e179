"""Backend selection for the shortest-path kernels.

The compiled extension is used when it was built; otherwise the pure-Python
twin. Set ``LAZYSEARCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

if _compiled is None or os.environ.get("LAZYSEARCH_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    _impl = _compiled

BACKEND = "python" if _impl is _kernels_py else "cython"

distances = _impl.distances
shortest_path = _impl.shortest_path

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled
