"""Elementwise C-library ``log`` and ``exp``.

NumPy's SIMD ``log``/``exp`` can differ from the C library in the last bit,
while numba-compiled code calls the C library.  The pure-numpy kernels and
the Gaussian stream use these wrappers so both backends agree bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

_log = np.frompyfunc(math.log, 1, 1)
_exp = np.frompyfunc(math.exp, 1, 1)


def log(x) -> np.ndarray:
    return np.asarray(_log(np.asarray(x, dtype=float)), dtype=float)


def exp(x) -> np.ndarray:
    return np.asarray(_exp(np.asarray(x, dtype=float)), dtype=float)
