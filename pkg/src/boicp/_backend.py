"""Pick the nearest-neighbour kernel implementation at import time.

The compiled extension is used when it was built; setting
``BOICP_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

BACKEND = "python"

if os.environ.get("BOICP_PURE_PYTHON", "") not in ("", "0"):
    from . import _kdtree_py as kernels
else:
    try:
        from . import _kdtree as kernels

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _kdtree_py as kernels

from . import _kdtree_py as python_kernels

__all__ = ["BACKEND", "kernels", "python_kernels"]
