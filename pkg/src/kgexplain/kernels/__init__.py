"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``KGEXPLAIN_NO_NUMBA`` is unset (or ``0``). Both
backends stay importable for cross-checking and benchmarking.
"""

import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

USE_NUMBA = numba_backend is not None and os.environ.get("KGEXPLAIN_NO_NUMBA", "0") in ("", "0")

_active = numba_backend if USE_NUMBA else numpy_backend
BACKEND = "numba" if USE_NUMBA else "numpy"

bfs_within = _active.bfs_within
simple_paths = _active.simple_paths
feature_masses = _active.feature_masses
auc_score = _active.auc_score

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "auc_score",
    "bfs_within",
    "feature_masses",
    "numba_backend",
    "numpy_backend",
    "simple_paths",
]
