"""Select between numba-compiled kernels and their plain-numpy fallbacks.

Set ``HYPGLOVE_DISABLE_NUMBA=1`` before importing the package to run every
kernel as ordinary Python/numpy code. The flag is read once at import time.
"""

import os

_DISABLED = os.environ.get("HYPGLOVE_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:
    _numba = None

HAS_NUMBA = _numba is not None

if HAS_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # try OpenMP first; probing an outdated TBB only produces a warning
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def njit(*args, **kwargs):
    if HAS_NUMBA:
        return _numba.njit(*args, **kwargs)

    def wrapper(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrapper


if HAS_NUMBA:
    prange = _numba.prange
else:
    prange = range


def set_num_threads(n: int) -> None:
    if HAS_NUMBA:
        _numba.set_num_threads(max(1, min(int(n), _numba.config.NUMBA_NUM_THREADS)))


def get_num_threads() -> int:
    if HAS_NUMBA:
        return _numba.get_num_threads()
    return 1
