"""Modified Bessel series, squared Bessel transition law and its tail bounds.

The squared Bessel process of dimension ``delta`` started at ``x0^2`` has
transition density ``q_t(x0^2, y)``; its CDF below a level ``c`` decays like
``t^(-delta/2)``, which is what makes the integral
``int (1+t)^-1 P[Z(t) <= c] dt`` finite for every ``delta > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import quadrature
from .diffusion import ConvergenceVerdict, classify_increments

BESSEL_X_MAX = 100.0
MAX_TERMS = 500
SERIES_RTOL = 1e-16


class BesselRangeError(ValueError):
    """Argument outside the range where the power series is used."""


class TailBoundPreconditionError(ValueError):
    def __init__(self, message: str, t_min: float):
        super().__init__(message)
        self.t_min = t_min


def _is_nonpositive_integer(v: float) -> bool:
    return v <= 0 and float(v).is_integer()


def _rgamma(v: float) -> float:
    """1/Gamma(v), with 1/Gamma(0, -1, -2, ...) = 0."""
    if _is_nonpositive_integer(v):
        return 0.0
    if v > 170.0:
        return math.exp(-math.lgamma(v))
    return 1.0 / math.gamma(v)


def series_sum(nu: float, x) -> np.ndarray:
    """``sum_n (x/2)^(2n) / (n! Gamma(nu+n+1))`` so that I_nu(x) = (x/2)^nu * this.

    Terms follow the ratio recurrence, so no power of ``x`` is formed
    explicitly.  Summation stops once every term is below 1e-16 of its
    partial sum (at most 500 terms).
    """
    x = np.asarray(x, dtype=float)
    quarter = 0.25 * x * x
    term = np.full(x.shape, _rgamma(nu + 1.0))
    n0 = 0
    if term.size and term.flat[0] == 0.0:
        # nu is a negative integer: the first -nu terms vanish.
        n0 = int(-nu)
        term = quarter**n0 / math.factorial(n0) * _rgamma(nu + n0 + 1.0)
    total = term.copy()
    for n in range(n0, n0 + MAX_TERMS):
        term = term * quarter / ((n + 1.0) * (nu + n + 1.0))
        total = total + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            break
    return total


def _check_bessel_args(x: np.ndarray) -> None:
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError("bessel_i requires x >= 0")
    if np.any(x > BESSEL_X_MAX):
        raise BesselRangeError(
            f"bessel_i power series is supported on [0, {BESSEL_X_MAX:g}]; got x = {float(np.max(x))!r}"
        )


def bessel_i(nu: float, x):
    """Modified Bessel function of the first kind by its power series.

    Supported for ``0 <= x <= 100``.  For a negative integer order the
    reciprocal-Gamma convention gives ``I_{-m} = I_m``.  At ``x = 0`` with
    ``-1 < nu < 0`` the value is ``+inf``.
    """
    scalar = np.ndim(x) == 0
    xa = np.asarray(x, dtype=float)
    _check_bessel_args(xa)
    nu = float(nu)
    if _is_nonpositive_integer(nu) and nu < 0:
        return bessel_i(-nu, x)
    s = series_sum(nu, xa)
    with np.errstate(divide="ignore"):
        pref = np.power(0.5 * xa, nu)
    if nu == 0:
        pref = np.ones_like(xa)
    out = pref * s
    if not np.all(np.isfinite(out) | (xa == 0)):
        raise BesselRangeError(f"bessel_i overflowed for nu={nu}; reduce x")
    return float(out) if scalar else out


def bessel_small_x_limit(nu: float) -> float:
    """Limit of I_nu(x)/x^nu as x -> 0+, i.e. (1/2)^nu / Gamma(nu+1)."""
    if not nu > -1:
        raise ValueError("bessel_small_x_limit requires nu > -1")
    return 0.5**nu / math.gamma(nu + 1.0)


def find_xbar(delta: float) -> float:
    """A witness x > 0 below which I_nu(x) < 2 (1/2)^nu x^nu / Gamma(nu+1), nu = delta/2 - 1.

    Doubling from 1e-3 brackets the first failure, then 60 bisection steps
    shrink the bracket; the lower (still valid) endpoint is returned.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    nu = 0.5 * delta - 1.0
    limit2 = 2.0 * bessel_small_x_limit(nu)

    def holds(x: float) -> bool:
        return bessel_i(nu, x) < limit2 * x**nu

    lo = 1e-3
    if not holds(lo):  # pragma: no cover - the limit guarantees this for any delta > 0
        raise ArithmeticError("inequality fails at the initial bracket")
    hi = 2.0 * lo
    while holds(hi):
        lo, hi = hi, 2.0 * hi
        if hi > BESSEL_X_MAX:
            raise BesselRangeError("no xbar found inside the series range")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo


# --------------------------------------------------------------------------
# squared Bessel transition law


@dataclass(frozen=True)
class DensitySpec:
    delta: float
    t: float
    x0_sq: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not self.x0_sq >= 0:
            raise ValueError("x0_sq must be nonnegative")

    @property
    def nu(self) -> float:
        return self.delta / 2.0 - 1.0

    @classmethod
    def from_x0(cls, delta: float, t: float, x0: float) -> "DensitySpec":
        return cls(delta, t, x0 * x0)


def sqbessel_density(spec: DensitySpec, y):
    """Transition density q_t(x0^2, y) of the squared Bessel process."""
    scalar = np.ndim(y) == 0
    ya = np.asarray(y, dtype=float)
    if np.any(~(ya > 0)):
        raise ValueError("sqbessel_density requires y > 0")
    d, t, a = spec.delta, spec.t, spec.x0_sq
    nu = spec.nu
    if a == 0.0:
        out = (2.0 * t) ** (-d / 2.0) / math.gamma(d / 2.0) * ya ** (d / 2.0 - 1.0) * np.exp(-ya / (2.0 * t))
    else:
        z = math.sqrt(a) * np.sqrt(ya) / t
        out = (
            1.0 / (2.0 * t)
            * (ya / a) ** (nu / 2.0)
            * np.exp(-(a + ya) / (2.0 * t))
            * bessel_i(nu, z)
        )
    return float(out) if scalar else out


def _regular_part(spec: DensitySpec, y: np.ndarray) -> np.ndarray:
    """q_t(x0^2, y) / y^nu: smooth on [0, inf) for both branches."""
    t = spec.t
    z = math.sqrt(spec.x0_sq) * np.sqrt(np.maximum(y, 0.0)) / t
    _check_bessel_args(np.asarray(z))
    return (2.0 * t) ** (-spec.delta / 2.0) * np.exp(-(spec.x0_sq + y) / (2.0 * t)) * series_sum(spec.nu, z)


def _cdf_integrand(spec: DensitySpec):
    """Integrand and variable map for P[Z <= c].

    For delta < 2 the factor y^(delta/2 - 1) is absorbed by y = u^(2/delta),
    leaving (2/delta) * regular part in u on [0, c^(delta/2)].
    """
    d = spec.delta
    if d < 2.0:
        p = 2.0 / d

        def fn(u):
            return p * _regular_part(spec, np.power(np.maximum(u, 0.0), p))

        return fn, lambda c: np.power(c, d / 2.0)

    def fn(y):
        return _regular_part(spec, y) * np.power(np.maximum(y, 0.0), spec.nu)

    return fn, lambda c: c


def sqbessel_cdf(spec: DensitySpec, c, *, abstol: float = 1e-10, reltol: float = 1e-10):
    """P[Z(t) <= c] by adaptive quadrature of the transition density.

    ``c`` may be an array; values are then accumulated over the sorted
    levels so large sample sets cost one pass.
    """
    scalar = np.ndim(c) == 0
    ca = np.asarray(c, dtype=float)
    if np.any(~(ca > 0)):
        raise ValueError("sqbessel_cdf requires c > 0")
    fn, to_u = _cdf_integrand(spec)
    if scalar:
        val, _ = quadrature.integrate(fn, 0.0, float(to_u(float(ca))), abstol=abstol, reltol=reltol)
        return min(max(val, 0.0), 1.0 + 1e-8)
    flat = ca.ravel()
    order = np.argsort(flat, kind="stable")
    u = to_u(flat[order])
    edges = np.concatenate([[0.0], u])
    pieces = quadrature.integrate_many(fn, edges[:-1], edges[1:], abstol=abstol)
    cum = np.cumsum(pieces)
    out = np.empty_like(flat)
    out[order] = np.clip(cum, 0.0, 1.0 + 1e-8)
    return out.reshape(ca.shape)


# --------------------------------------------------------------------------
# Step-A tail bound


@dataclass(frozen=True)
class TailBoundSpec:
    c: float
    t_min: float
    xbar: float
    coefficient: float


def tail_bound_spec(spec: DensitySpec, c: float) -> TailBoundSpec:
    if not c > 0:
        raise ValueError("c must be positive")
    d = spec.delta
    xbar = find_xbar(d)
    x0 = math.sqrt(spec.x0_sq)
    t_min = x0 * math.sqrt(c) / xbar if x0 != 0.0 else 0.0
    coef = 0.5 ** (d / 2.0 - 1.0) / math.gamma(d / 2.0) * c ** (d / 2.0) / (d / 2.0)
    return TailBoundSpec(c=c, t_min=t_min, xbar=xbar, coefficient=coef)


def step_a_tail_bound(spec: DensitySpec, c: float) -> float:
    """Explicit upper bound on P[Z(t) <= c], valid for t >= t_min."""
    if not c > 0:
        raise ValueError("c must be positive")
    d, t = spec.delta, spec.t
    if spec.x0_sq == 0.0:
        return (2.0 * t) ** (-d / 2.0) / math.gamma(d / 2.0) * c ** (d / 2.0) / (d / 2.0)
    tb = tail_bound_spec(spec, c)
    if t < tb.t_min:
        raise TailBoundPreconditionError(f"bound needs t >= t_min = {tb.t_min!r}, got t = {t!r}", tb.t_min)
    return tb.coefficient * t ** (-d / 2.0)


def step_a_integral_finite(
    spec: DensitySpec,
    c: float,
    *,
    probability: Callable[[float], float] | None = None,
    n_doublings: int = 40,
) -> ConvergenceVerdict:
    """Classify int_{e-1}^inf P[Z(t) <= c] / (1+t) dt at checkpoints (e-1) 2^k.

    ``spec.t`` is ignored; ``probability`` overrides the CDF (for testing
    the classifier plumbing).
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if probability is None:

        def probability(t: float) -> float:
            return sqbessel_cdf(DensitySpec(spec.delta, t, spec.x0_sq), c, abstol=0.0, reltol=1e-11)

    def integrand_log(w: np.ndarray) -> np.ndarray:
        t = np.exp(w)
        p = np.array([probability(float(ti)) for ti in t.ravel()]).reshape(t.shape)
        return t / (1.0 + t) * p

    t0 = math.e - 1.0
    T = t0 * 2.0 ** np.arange(n_doublings + 1)
    w = np.log(T)
    inc = np.empty(n_doublings)
    for k in range(n_doublings):
        inc[k], _ = quadrature.integrate(integrand_log, w[k], w[k + 1], abstol=0.0, reltol=1e-8)
    return classify_increments(T, inc, log_scale=np.log(T))
