"""Scale functions, speed measures, Feller's v-test and Motoo's criterion.

Everything here concerns an autonomous diffusion ``dX = f(X) dt + g(X) dB``
on an interval ``(lo, hi)``.  Improper integrals toward a boundary are
decided numerically: partial integrals are taken at geometric checkpoints and
the sequence of increments is classified as convergent, divergent or (when
the evidence is too close to call) inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import quadrature

CONVERGENT = "convergent"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

WINDOW = 8
GEOMETRIC_RATIO = 0.9
CONVERGENT_SLOPE = -1.5
DIVERGENT_SLOPE = -1.1
UPPER_DOUBLINGS = 40
LOWER_DECADES = 20


@dataclass(frozen=True)
class ConvergenceVerdict:
    verdict: str
    checkpoints: tuple[tuple[float, float], ...]
    diagnostic: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)

    @property
    def convergent(self) -> bool:
        return self.verdict == CONVERGENT

    @property
    def divergent(self) -> bool:
        return self.verdict == DIVERGENT

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "diagnostic": self.diagnostic,
            "checkpoints": [list(p) for p in self.checkpoints],
        }
        if self.parts:
            out["parts"] = {k: v.to_dict() for k, v in self.parts.items()}
        return out


def classify_increments(
    checkpoints,
    increments,
    *,
    log_scale=None,
    window: int = WINDOW,
) -> ConvergenceVerdict:
    """Decide whether ``sum(increments)`` stays finite as checkpoints grow.

    ``increments[k]`` is the integral between ``checkpoints[k]`` and
    ``checkpoints[k+1]``.  ``log_scale[k]`` is the logarithm of the distance
    measure at checkpoint ``k`` (``log T`` toward infinity, ``-log(x - lo)``
    toward a finite endpoint); the power-law test regresses the log of the
    increments on its log.

    Rules on the last ``window`` increments:

    * all successive ratios <= 0.9  -> convergent (geometric tail);
    * power-law slope <= -1.5       -> convergent;
    * slope >= -1.1 or any inf      -> divergent (decay no faster than 1/k);
    * otherwise                     -> inconclusive.
    """
    T = np.asarray(checkpoints, dtype=float)
    r = np.abs(np.asarray(increments, dtype=float))
    if T.size != r.size + 1:
        raise ValueError("need one more checkpoint than increments")
    if r.size < window + 1:
        raise ValueError(f"need at least {window + 1} increments")
    with np.errstate(over="ignore", invalid="ignore"):
        partial = np.concatenate([[0.0], np.cumsum(r)])
    cps = tuple(zip(T.tolist(), partial.tolist()))
    w = r[-window:]

    def verdict(v, **diag):
        return ConvergenceVerdict(v, cps, diag)

    if np.any(np.isinf(w)) or np.isinf(partial[-1]):
        return verdict(DIVERGENT, rule="overflow")
    if np.any(np.isnan(w)):
        return verdict(INCONCLUSIVE, rule="nan increments")
    if np.all(w == 0.0):
        return verdict(CONVERGENT, rule="vanishing increments", tail=0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(w[:-1] > 0, w[1:] / w[:-1], np.where(w[1:] == 0, 0.0, np.inf))
    q = float(np.max(ratios))
    if q <= GEOMETRIC_RATIO:
        tail = float(w[-1] * q / (1.0 - q))
        return verdict(CONVERGENT, rule="geometric", max_ratio=q, tail=tail)
    if np.any(w == 0.0):
        return verdict(INCONCLUSIVE, rule="zero increments without geometric decay", max_ratio=q)

    if log_scale is not None:
        L = np.asarray(log_scale, dtype=float)[-window - 1 : -1]
    else:
        L = None
    if L is not None and np.all(L > 0):
        xs = np.log(L)
    else:
        xs = np.log(np.arange(r.size - window, r.size) + 1.0)
    slope = float(np.polyfit(xs, np.log(w), 1)[0])
    if slope <= CONVERGENT_SLOPE:
        return verdict(CONVERGENT, rule="power law", max_ratio=q, slope=slope)
    if slope >= DIVERGENT_SLOPE:
        return verdict(DIVERGENT, rule="power law", max_ratio=q, slope=slope)
    return verdict(INCONCLUSIVE, rule="power law", max_ratio=q, slope=slope)


def classify_integral(fn: Callable, t0: float, n_doublings: int = UPPER_DOUBLINGS) -> ConvergenceVerdict:
    """Classify ``int_{t0}^inf fn(t) dt`` for a nonnegative vectorized ``fn``."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    T = t0 * 2.0 ** np.arange(n_doublings + 1)
    w = np.log(T)

    def in_log(s):
        t = np.exp(s)
        return _vec(fn)(t) * t

    inc = np.array(
        [quadrature.integrate(in_log, w[k], w[k + 1], abstol=0.0, reltol=1e-10)[0] for k in range(n_doublings)]
    )
    return classify_increments(T, inc, log_scale=w)


def _vec(fn: Callable) -> Callable[[np.ndarray], np.ndarray]:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)

    return wrapped


# --------------------------------------------------------------------------
# autonomous diffusions


@dataclass(frozen=True)
class AutonomousDiffusion:
    """``dX = drift(X) dt + diffusion(X) dB`` on ``(domain_lo, domain_hi)``.

    ``drift`` and ``diffusion`` are evaluated on numpy arrays; plain scalar
    lambdas are broadcast.
    """

    drift: Callable
    diffusion: Callable
    domain_lo: float = 0.0
    domain_hi: float = math.inf

    def __post_init__(self):
        if not self.domain_lo >= 0:
            raise ValueError("domain_lo must be >= 0")
        if not self.domain_hi > self.domain_lo:
            raise ValueError("domain_hi must exceed domain_lo")

    def contains(self, x: float) -> bool:
        return self.domain_lo < x < self.domain_hi


def brownian_generator() -> AutonomousDiffusion:
    return AutonomousDiffusion(lambda x: 0.0, lambda x: 1.0)


def upper_comparison_generator(rho: float, diffusion: Callable | float = 1.0) -> AutonomousDiffusion:
    """Generator of ``dX = rho/X dt + g(X) dB`` (the dominating process of |X|)."""
    g = diffusion if callable(diffusion) else (lambda x, s=float(diffusion): s)
    return AutonomousDiffusion(lambda x: rho / x, g)


def cir_generator(delta: float) -> AutonomousDiffusion:
    """Generator of ``dU = (delta - U) dt + 2 sqrt(U) dW``."""
    return AutonomousDiffusion(lambda x: delta - x, lambda x: 2.0 * np.sqrt(x))


class _Coordinate:
    """Map between the state ``y`` in (lo, hi) and an unbounded variable ``u``."""

    def __init__(self, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        self.finite = math.isfinite(hi)

    def y(self, u):
        if self.finite:
            return self.lo + (self.hi - self.lo) / (1.0 + np.exp(-u))
        return self.lo + np.exp(u)

    def dydu(self, u):
        if self.finite:
            s = 1.0 / (1.0 + np.exp(-u))
            return (self.hi - self.lo) * s * (1.0 - s)
        return np.exp(u)

    def u(self, y):
        y = np.asarray(y, dtype=float)
        if self.finite:
            return np.log((y - self.lo) / (self.hi - y))
        return np.log(y - self.lo)


class _Cumulative:
    """``F(y) = int_c^y fn(z) dz`` tabulated on a uniform grid in ``u``.

    Cells ``[u_c + j h, u_c + (j+1) h]`` are integrated adaptively on demand
    and cached; a point value adds one Gauss-Kronrod panel from the nearest
    node below it.
    """

    def __init__(self, fn: Callable, coord: _Coordinate, c: float, h: float = math.log(2.0) / 8.0):
        self.fn = fn
        self.coord = coord
        self.uc = float(coord.u(c))
        self.h = h
        self.jmin = 0
        self.cells = np.zeros(0)
        self.prefix = np.zeros(1)

    def _g(self, u):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self.fn(self.coord.y(u)) * self.coord.dydu(u)

    def _cell(self, j: int) -> float:
        a = self.uc + j * self.h
        try:
            with np.errstate(invalid="ignore", over="ignore"):
                val, _ = quadrature.integrate(self._g, a, a + self.h, abstol=1e-300, reltol=1e-12)
        except quadrature.QuadratureError as exc:
            if math.isnan(exc.value):
                raise
            return math.inf
        return val

    def _ensure(self, jlo: int, jhi: int) -> None:
        """Cover cells jlo .. jhi - 1 (node indices jlo .. jhi)."""
        jlo = min(jlo, 0)
        jhi = max(jhi, 0)
        cur_lo, cur_hi = self.jmin, self.jmin + self.cells.size
        if jlo >= cur_lo and jhi <= cur_hi:
            return
        new_lo = min(jlo, cur_lo)
        new_hi = max(jhi, cur_hi)
        below = [self._cell(j) for j in range(new_lo, cur_lo)]
        above = [self._cell(j) for j in range(cur_hi, new_hi)]
        self.cells = np.concatenate([below, self.cells, above])
        self.jmin = new_lo
        # prefix[i] = integral from u_c to node (jmin + i)
        with np.errstate(invalid="ignore", over="ignore"):
            right = np.cumsum(self.cells[-self.jmin :]) if self.jmin < 0 else np.cumsum(self.cells)
            left = -np.cumsum(self.cells[: -self.jmin][::-1])[::-1] if self.jmin < 0 else np.zeros(0)
        self.prefix = np.concatenate([left, [0.0], right])

    def _node_index(self, u: np.ndarray) -> np.ndarray:
        return np.floor((u - self.uc) / self.h).astype(np.int64)

    def _panel(self, ua, ub) -> np.ndarray:
        ua = np.atleast_1d(ua)
        ub = np.atleast_1d(ub)
        with np.errstate(over="ignore", invalid="ignore"):
            v, _ = quadrature.gk15(self._g, ua, ub)
        return v

    def __call__(self, y):
        scalar = np.ndim(y) == 0
        u = np.atleast_1d(self.coord.u(y)).astype(float).ravel()
        j = self._node_index(u)
        self._ensure(int(j.min()), int(j.max()) + 1)
        node = self.uc + j * self.h
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.prefix[j - self.jmin] + self._panel(node, u)
        return float(out[0]) if scalar else out.reshape(np.shape(y))

    def between(self, a: float, b: float) -> float:
        """``int_a^b fn`` summed from cached cells, without cancellation."""
        if a == b:
            return 0.0
        if b < a:
            return -self.between(b, a)
        ua, ub = float(self.coord.u(a)), float(self.coord.u(b))
        ja, jb = int(self._node_index(np.array(ua))), int(self._node_index(np.array(ub)))
        self._ensure(ja, jb + 1)
        if ja == jb:
            return float(self._panel(ua, ub)[0])
        head = float(self._panel(ua, self.uc + (ja + 1) * self.h)[0])
        tail = float(self._panel(self.uc + jb * self.h, ub)[0])
        mid = float(np.sum(self.cells[ja + 1 - self.jmin : jb - self.jmin]))
        return head + mid + tail


class _Generator:
    """Call-local tables for one diffusion and reference point ``c``."""

    def __init__(self, d: AutonomousDiffusion, c: float):
        if not d.contains(c):
            raise ValueError(f"reference point c={c!r} is outside the domain")
        self.d = d
        self.c = c
        self.coord = _Coordinate(d.domain_lo, d.domain_hi)
        f, g = _vec(d.drift), _vec(d.diffusion)
        self.f, self.g = f, g
        self.exponent = _Cumulative(lambda y: f(y) / g(y) ** 2, self.coord, c)
        self.scale = _Cumulative(self.scale_density, self.coord, c)
        self.speed = _Cumulative(self.speed_density, self.coord, c)
        self.v = _Cumulative(lambda y: self.scale_density(y) * self.speed(y), self.coord, c)

    def scale_density(self, y):
        with np.errstate(over="ignore"):
            return np.exp(-2.0 * self.exponent(y))

    def speed_density(self, y):
        with np.errstate(over="ignore", divide="ignore"):
            return 2.0 / (self.scale_density(y) * self.g(y) ** 2)

    def checkpoints(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        """Checkpoint states toward a boundary and the log of their distance measure."""
        lo, hi, c = self.d.domain_lo, self.d.domain_hi, self.c
        if side == "upper":
            k = np.arange(UPPER_DOUBLINGS + 1)
            if math.isfinite(hi):
                y = hi - (hi - c) * 2.0**-k
                return y, -np.log(hi - y)
            y = lo + (c - lo) * 2.0**k
            return y, np.log(y)
        if side == "lower":
            k = np.arange(LOWER_DECADES + 1)
            y = lo + (c - lo) * 10.0**-k
            return y, -np.log(y - lo)
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")

    def boundary_verdict(self, table: _Cumulative, side: str) -> ConvergenceVerdict:
        y, logs = self.checkpoints(side)
        inc = np.array([table.between(y[k], y[k + 1]) for k in range(y.size - 1)])
        return classify_increments(y, inc, log_scale=logs)


def _check_point(d: AutonomousDiffusion, *xs: float) -> None:
    for x in xs:
        if not d.contains(float(x)):
            raise ValueError(f"{x!r} is outside the domain ({d.domain_lo}, {d.domain_hi})")


def scale_function(d: AutonomousDiffusion, c: float, x):
    """``s_c(x) = int_c^x exp(-2 int_c^y f/g^2) dy``."""
    _check_point(d, c, *np.atleast_1d(x))
    return _Generator(d, c).scale(x)


def scale_endpoints(d: AutonomousDiffusion, c: float) -> tuple[ConvergenceVerdict, ConvergenceVerdict]:
    """Verdicts for ``s_c(lo+)`` and ``s_c(hi-)``: divergent means the limit is infinite."""
    gen = _Generator(d, c)
    return gen.boundary_verdict(gen.scale, "lower"), gen.boundary_verdict(gen.scale, "upper")


def _combine(parts: dict) -> ConvergenceVerdict:
    verdicts = [p.verdict for p in parts.values()]
    if DIVERGENT in verdicts:
        v = DIVERGENT
    elif all(x == CONVERGENT for x in verdicts):
        v = CONVERGENT
    else:
        v = INCONCLUSIVE
    return ConvergenceVerdict(v, (), {"rule": "both boundaries"}, dict(parts))


def speed_measure_total(d: AutonomousDiffusion, c: float) -> ConvergenceVerdict:
    """Is ``m(lo, hi) = int 2 / (s' g^2)`` finite?  Checks both boundaries."""
    _check_point(d, c)
    gen = _Generator(d, c)
    return _combine(
        {"lower": gen.boundary_verdict(gen.speed, "lower"), "upper": gen.boundary_verdict(gen.speed, "upper")}
    )


def feller_v(d: AutonomousDiffusion, c: float, x):
    """``v_c(x) = int_c^x s'_c(y) int_c^y 2 dz / (s'_c(z) g^2(z)) dy`` (nonnegative)."""
    _check_point(d, c, *np.atleast_1d(x))
    return _Generator(d, c).v(x)


def feller_explosion_test(d: AutonomousDiffusion, c: float) -> tuple[ConvergenceVerdict, ConvergenceVerdict]:
    """Verdicts for ``v(lo+)`` and ``v(hi-)``; divergent at both means no exit in finite time."""
    _check_point(d, c)
    gen = _Generator(d, c)
    return gen.boundary_verdict(gen.v, "lower"), gen.boundary_verdict(gen.v, "upper")


class MotooPreconditionError(ValueError):
    pass


def motoo_classify(
    d: AutonomousDiffusion,
    c: float,
    h: Callable,
    t0: float,
    *,
    check_preconditions: bool = True,
    n_doublings: int = UPPER_DOUBLINGS,
) -> ConvergenceVerdict:
    """Classify ``int_{t0}^inf dt / s_c(h(t))``.

    Divergent means ``limsup X(t)/h(t) >= 1`` almost surely, convergent means
    it happens with probability 0 (for a recurrent diffusion with finite
    speed measure).
    """
    _check_point(d, c)
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    gen = _Generator(d, c)
    hv = _vec(h)
    T = t0 * 2.0 ** np.arange(n_doublings + 1)
    probe = np.exp(np.linspace(math.log(t0), math.log(T[-1]), 50 * n_doublings + 1))
    hp = hv(probe)
    if check_preconditions:
        speed = _combine(
            {"lower": gen.boundary_verdict(gen.speed, "lower"), "upper": gen.boundary_verdict(gen.speed, "upper")}
        )
        if not speed.convergent:
            raise MotooPreconditionError(f"speed measure m(0, inf) is not finite (verdict: {speed.verdict})")
        if np.any(np.diff(hp) <= 0):
            raise MotooPreconditionError("h is not increasing on [t0, inf)")
        if np.any(hp >= d.domain_hi) or np.any(hp <= d.domain_lo):
            raise MotooPreconditionError("h leaves the state space")
        if np.any(gen.scale(hp) <= 0):
            raise MotooPreconditionError("s(h(t)) must be positive for t >= t0; increase t0")

    def in_log(w):
        t = np.exp(w)
        with np.errstate(divide="ignore", over="ignore"):
            return t / gen.scale(hv(t))

    w = np.log(T)
    inc = np.array(
        [quadrature.integrate(in_log, w[k], w[k + 1], abstol=0.0, reltol=1e-9)[0] for k in range(n_doublings)]
    )
    return classify_increments(T, inc, log_scale=w)
