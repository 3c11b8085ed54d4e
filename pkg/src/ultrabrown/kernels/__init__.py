"""Hot kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import from ``ULTRABROWN_BACKEND``
(``numba``, the default, or ``numpy``).  If numba cannot be imported the
numpy kernels are used.  Both backends are importable directly for
benchmarks and cross-checks.
"""
import logging
import os

from . import _numpy as numpy_backend

log = logging.getLogger(__name__)

STREAM_WEIGHT = 1
STREAM_GAUSS = 2
STREAM_SERIES = 3
STREAM_GW = 4

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

_requested = os.environ.get("ULTRABROWN_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"ULTRABROWN_BACKEND must be 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and numba_backend is None:
    log.warning("numba unavailable; falling back to numpy kernels")
    _requested = "numpy"

BACKEND = _requested
_impl = numba_backend if BACKEND == "numba" else numpy_backend

draw_uniform = _impl.draw_uniform
add_mod = _impl.add_mod
tree_sums = _impl.tree_sums
eval_points = _impl.eval_points
candidate_walk = _impl.candidate_walk

__all__ = [
    "BACKEND", "STREAM_WEIGHT", "STREAM_GAUSS", "STREAM_SERIES", "STREAM_GW",
    "draw_uniform", "add_mod", "tree_sums", "eval_points", "candidate_walk",
    "numpy_backend", "numba_backend",
]
