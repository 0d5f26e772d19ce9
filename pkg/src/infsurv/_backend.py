"""Select the compiled kernels when available, else the numpy fallback.

Set ``INFSURV_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("INFSURV_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        kernels = _fallback
        BACKEND = "python"

logrank_scan = kernels.logrank_scan
route_tree = kernels.route_tree
simplex_core = kernels.simplex_core
OPTIMAL = kernels.OPTIMAL
UNBOUNDED = kernels.UNBOUNDED
ITERATION_LIMIT = kernels.ITERATION_LIMIT
NUMERICAL = kernels.NUMERICAL
