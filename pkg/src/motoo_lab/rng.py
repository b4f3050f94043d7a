"""Counter-based Gaussian stream.

Every path owns a 64-bit key (``seed ^ path_index``).  Draw ``k`` of that
path is ``splitmix64(key + (k + 1) * GOLDEN)`` mapped to a uniform in (0, 1)
and pushed through the Wichura AS241 inverse normal CDF.  Any draw can be
regenerated without replaying the ones before it, so ensembles are
reproducible however the paths are scheduled.
"""

from __future__ import annotations

import numpy as np

from . import _libm

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 2.0**-53

# AS241 (PPND16) coefficients.
A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def path_keys(seed: int, n_paths: int, first: int = 0) -> np.ndarray:
    """Keys ``seed ^ j`` for paths ``j = first .. first + n_paths - 1``."""
    if n_paths < 0:
        raise ValueError("n_paths must be nonnegative")
    s = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.arange(first, first + n_paths, dtype=np.uint64) ^ s


def _horner(coef, r):
    acc = coef[7]
    for c in coef[6::-1]:
        acc = acc * r + c
    return acc


def ndtri(p):
    """Inverse standard normal CDF (AS241), vectorized over ``p`` in (0, 1)."""
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    out = np.empty_like(q)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(A, r) / _horner(B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-_libm.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(C, rn) / _horner(D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(E, rf) / _horner(F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def splitmix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):  # arithmetic is mod 2^64 by design
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(key, counters) -> np.ndarray:
    """Uniforms in (0, 1) for draw indices ``counters`` of ``key`` (broadcast)."""
    key = np.asarray(key, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = splitmix64(key + (counters + np.uint64(1)) * GOLDEN)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * TWO_M53


def normals(key, counters) -> np.ndarray:
    return ndtri(uniforms(key, counters))


def brownian_increments(seed: int, n: int, dt: float, path: int = 0) -> np.ndarray:
    """The ``n`` increments of path ``path`` under ``seed``, each ~ N(0, dt)."""
    key = path_keys(seed, 1, first=path)[0]
    return np.sqrt(dt) * normals(key, np.arange(n, dtype=np.uint64))
