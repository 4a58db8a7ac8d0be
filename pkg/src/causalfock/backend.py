"""Numba/numpy backend selection for the hot numeric kernels.

The package runs identically on two code paths:

* ``numba``  -- inner loops compiled with ``@njit`` (default when numba
  imports cleanly),
* ``numpy``  -- chunked vectorized fallback, no compilation.

Select with the environment variable ``CAUSALFOCK_BACKEND=numpy|numba``
(read once at import time).  Both paths use a fixed summation order, so
results are bit-reproducible per path.  ``benchmarks/bench_accel.py``
times one against the other.
"""

import os

_requested = os.environ.get("CAUSALFOCK_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"CAUSALFOCK_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

USE_NUMBA = False
if _requested == "numba":
    try:
        import numba  # noqa: F401
        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """numba.njit when the numba backend is active, identity otherwise."""
    if USE_NUMBA:
        import numba
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def deco(fn):
        return fn

    return deco
