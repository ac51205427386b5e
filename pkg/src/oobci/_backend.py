"""Select the tree-kernel implementation at import time.

The compiled ``_core`` extension is used when it is importable; otherwise
the numpy fallback in ``_pycore`` is used. Set ``OOBCI_BACKEND=python`` to
force the fallback (``cython`` makes a missing extension an error).
"""

import os

from . import _pycore

_requested = os.environ.get("OOBCI_BACKEND", "").strip().lower()

if _requested == "python":
    kernels = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pycore
        BACKEND = "python"

BACKENDS = {"python": _pycore}
if BACKEND == "cython":
    BACKENDS["cython"] = kernels
