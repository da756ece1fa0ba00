"""Kernel backend selection.

The hot inner loops (log Bessel K, per-component posterior expectations)
exist twice: a numba-compiled version and a pure numpy/scipy version.
``PSALM_BACKEND=numpy`` in the environment forces the fallback; anything
else (or an unimportable numba) selects numba when available.
"""

import os
import warnings

_requested = os.environ.get("PSALM_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    warnings.warn(
        f"PSALM_BACKEND={_requested!r} not recognized; expected 'numba' or "
        "'numpy'. Falling back to 'numba'."
    )
    _requested = "numba"

ACTIVE = "numpy"
if _requested == "numba":
    try:
        import numba  # noqa: F401

        ACTIVE = "numba"
    except ImportError:
        warnings.warn("numba unavailable; using the pure-numpy kernel backend")


def active_backend():
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    return ACTIVE
