"""Kernel backend selection.

The hot inner loops have two implementations: numba ``@njit`` kernels and
pure-numpy array code.  Selection is by the ``HRS_BACKEND`` environment
variable: ``numba`` (default when numba imports), ``numpy`` to force the
fallback, or ``auto``.  ``HRS_THREADS`` caps numba's thread count
(0 or unset = automatic).
"""
from __future__ import annotations

import os

_choice = os.environ.get("HRS_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(f"HRS_BACKEND must be auto|numba|numpy, got {_choice!r}")

HAVE_NUMBA = False
if _choice != "numpy":
    try:
        import numba  # noqa: F401
        HAVE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
USE_NUMBA = HAVE_NUMBA and _choice in ("auto", "numba")

if USE_NUMBA:
    _threads = os.environ.get("HRS_THREADS", "0").strip()
    try:
        _nthreads = int(_threads)
    except ValueError:
        _nthreads = 0
    if _nthreads > 0:
        import numba
        numba.set_num_threads(min(_nthreads, numba.config.NUMBA_NUM_THREADS))


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
