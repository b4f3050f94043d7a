"""Kernel backend selection.

``MOTOO_LAB_BACKEND=numpy`` forces the pure-numpy kernels; the default is
``numba`` whenever numba imports.  ``MOTOO_LAB_THREADS`` sets the default
worker count for ensemble runs.
"""

from __future__ import annotations

import os

_requested = os.environ.get("MOTOO_LAB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"MOTOO_LAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"
else:
    BACKEND = "numpy"


def default_workers() -> int:
    raw = os.environ.get("MOTOO_LAB_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError("MOTOO_LAB_THREADS must be a positive integer")
    return n
