"""SDE model class, coefficient families and hypothesis checks.

A model is ``dX = f(X, t) dt + g(X) dB`` with user-certified constants
``rho`` (sup of x f), ``mu`` (inf of x f / g^2), ``sigma`` (limit of g at
infinity) and ``k1_sq <= g^2 <= k2_sq``.  Coefficients come from a registry
of named families so the simulation kernels can evaluate them without
calling back into Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Family:
    name: str
    code: int
    params: tuple[str, ...]
    fn: Callable
    defaults: tuple[float, ...] = ()


def _zero(x, t, p):
    return np.zeros(np.broadcast(x, t).shape)


def _rational(x, t, p):
    return p[0] * x / (1.0 + x * x) + np.zeros_like(t)


def _linear(x, t, p):
    return -p[0] * x + np.zeros_like(t)


def _modulated(x, t, p):
    return p[0] * x / (1.0 + x * x) * (1.0 + p[1] * np.sin(p[2] * t))


def _constant(x, p):
    return np.full(np.shape(x), p[0], dtype=float)


def _rational_bump(x, p):
    return p[0] + p[1] / (1.0 + x * x)


def _gaussian_bump(x, p):
    return p[0] + p[1] * np.exp(-x * x)


# Codes are mirrored by the branch tables in motoo_lab.sim._kernels_numba.
DRIFT_ZERO, DRIFT_RATIONAL, DRIFT_LINEAR, DRIFT_MODULATED = 0, 1, 2, 3
DIFF_CONSTANT, DIFF_RATIONAL_BUMP, DIFF_GAUSSIAN_BUMP = 0, 1, 2

DRIFT_FAMILIES: dict[str, Family] = {
    "zero": Family("zero", DRIFT_ZERO, (), _zero),
    "rational_drift": Family("rational_drift", DRIFT_RATIONAL, ("kappa",), _rational, (1.0,)),
    "linear": Family("linear", DRIFT_LINEAR, ("a",), _linear, (1.0,)),
    "modulated_rational": Family(
        "modulated_rational", DRIFT_MODULATED, ("kappa", "eps", "omega"), _modulated, (1.0, 0.5, 1.0)
    ),
}

DIFFUSION_FAMILIES: dict[str, Family] = {
    "constant": Family("constant", DIFF_CONSTANT, ("value",), _constant, (1.0,)),
    "rational_bump": Family("rational_bump", DIFF_RATIONAL_BUMP, ("sigma", "amp"), _rational_bump, (1.0, 1.0)),
    "gaussian_bump": Family("gaussian_bump", DIFF_GAUSSIAN_BUMP, ("sigma", "amp"), _gaussian_bump, (1.0, 1.0)),
}


class UnknownFamilyError(KeyError):
    pass


def _resolve(registry: Mapping[str, Family], name: str, params: Mapping[str, float] | None):
    try:
        fam = registry[name]
    except KeyError:
        raise UnknownFamilyError(f"unknown coefficient family {name!r}; known: {sorted(registry)}") from None
    params = dict(params or {})
    extra = set(params) - set(fam.params)
    if extra:
        raise ValueError(f"family {name!r} takes parameters {fam.params}, got unexpected {sorted(extra)}")
    values = []
    for key, default in zip(fam.params, fam.defaults):
        v = float(params.get(key, default))
        if not math.isfinite(v):
            raise ValueError(f"parameter {name}.{key} must be finite")
        values.append(v)
    return fam, tuple(values)


@dataclass(frozen=True)
class Drift:
    """Registered drift ``f(x, t)``; vectorized over numpy arrays."""

    family: str
    params: tuple[float, ...] = ()

    @classmethod
    def of(cls, family: str, **params: float) -> "Drift":
        fam, values = _resolve(DRIFT_FAMILIES, family, params)
        return cls(fam.name, values)

    @property
    def code(self) -> int:
        return DRIFT_FAMILIES[self.family].code

    def named_params(self) -> dict[str, float]:
        return dict(zip(DRIFT_FAMILIES[self.family].params, self.params))

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = DRIFT_FAMILIES[self.family].fn(x, t, self.params)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Diffusion:
    """Registered diffusion coefficient ``g(x)``; vectorized over numpy arrays."""

    family: str
    params: tuple[float, ...] = ()

    @classmethod
    def of(cls, family: str, **params: float) -> "Diffusion":
        fam, values = _resolve(DIFFUSION_FAMILIES, family, params)
        return cls(fam.name, values)

    @property
    def code(self) -> int:
        return DIFFUSION_FAMILIES[self.family].code

    def named_params(self) -> dict[str, float]:
        return dict(zip(DIFFUSION_FAMILIES[self.family].params, self.params))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = DIFFUSION_FAMILIES[self.family].fn(x, self.params)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ModelSpec:
    drift: Drift
    diffusion: Diffusion
    rho: float
    mu: float
    sigma: float
    k1_sq: float
    k2_sq: float
    x0: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.mu > -0.5:
            raise ValueError(f"mu must exceed -1/2, got {self.mu}")
        if self.sigma == 0 or not math.isfinite(self.sigma):
            raise ValueError("sigma must be finite and nonzero")
        if not (0 < self.k1_sq <= self.k2_sq < math.inf):
            raise ValueError(f"need 0 < k1_sq <= k2_sq, got {self.k1_sq}, {self.k2_sq}")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")

    @property
    def delta(self) -> float:
        """Dimension ``2 mu + 1`` of the lower comparison process."""
        return 2.0 * self.mu + 1.0

    def to_mapping(self) -> dict[str, object]:
        out: dict[str, object] = {"drift": self.drift.family}
        out.update({f"drift.{k}": v for k, v in self.drift.named_params().items()})
        out["diffusion"] = self.diffusion.family
        out.update({f"diffusion.{k}": v for k, v in self.diffusion.named_params().items()})
        out.update(
            rho=self.rho, mu=self.mu, sigma=self.sigma, k1_sq=self.k1_sq, k2_sq=self.k2_sq, x0=self.x0
        )
        return out


def model_from_mapping(raw: Mapping[str, object]) -> ModelSpec:
    """Build a ModelSpec from flat ``key -> value`` pairs (``drift.kappa`` style)."""
    raw = {str(k).strip().lower(): v for k, v in raw.items()}
    known = {"drift", "diffusion", "rho", "mu", "sigma", "k1_sq", "k2_sq", "x0"}
    for key in raw:
        if key not in known and not key.startswith(("drift.", "diffusion.")):
            raise ValueError(f"unknown model key {key!r}")
    missing = {"drift", "diffusion", "rho", "mu", "sigma", "k1_sq", "k2_sq"} - set(raw)
    if missing:
        raise ValueError(f"model section is missing {sorted(missing)}")
    dparams = {k.split(".", 1)[1]: float(v) for k, v in raw.items() if k.startswith("drift.")}
    gparams = {k.split(".", 1)[1]: float(v) for k, v in raw.items() if k.startswith("diffusion.")}
    return ModelSpec(
        drift=Drift.of(str(raw["drift"]).strip(), **dparams),
        diffusion=Diffusion.of(str(raw["diffusion"]).strip(), **gparams),
        rho=float(raw["rho"]),
        mu=float(raw["mu"]),
        sigma=float(raw["sigma"]),
        k1_sq=float(raw["k1_sq"]),
        k2_sq=float(raw["k2_sq"]),
        x0=float(raw.get("x0", 0.0)),
    )


def reference_model(x0: float = 1.0) -> ModelSpec:
    """f = x/(1+x^2), g = 1 + 1/(1+x^2): rho = 1, mu = 0, sigma = 1, g^2 in [1, 4]."""
    return ModelSpec(
        drift=Drift.of("rational_drift", kappa=1.0),
        diffusion=Diffusion.of("rational_bump", sigma=1.0, amp=1.0),
        rho=1.0,
        mu=0.0,
        sigma=1.0,
        k1_sq=1.0,
        k2_sq=4.0,
        x0=x0,
    )


def brownian_model(x0: float = 0.0) -> ModelSpec:
    """f = 0, g = 1 with the smallest admissible constants."""
    return ModelSpec(
        drift=Drift.of("zero"),
        diffusion=Diffusion.of("constant", value=1.0),
        rho=1.0,
        mu=0.0,
        sigma=1.0,
        k1_sq=1.0,
        k2_sq=1.0,
        x0=x0,
    )


# --------------------------------------------------------------------------
# validation


class ModelEvaluationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Check:
    name: str
    grid: str
    worst_violation: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    tol: float
    sigma_gap: float = math.nan
    x_max: float = math.nan

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "sigma_gap_at_x_max": self.sigma_gap,
            "x_max": self.x_max,
            "checks": [
                {
                    "name": c.name,
                    "grid": c.grid,
                    "worst_violation": c.worst_violation,
                    "passed": c.passed,
                    **({"note": c.note} if c.note else {}),
                }
                for c in self.checks
            ],
        }


def default_x_grid(n_per_side: int = 121) -> np.ndarray:
    """0 plus +/- log-spaced points from 1e-3 to 1e3."""
    pos = np.logspace(-3, 3, n_per_side)
    return np.concatenate([-pos[::-1], [0.0], pos])


def default_t_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-2, 4, 25)])


def _describe(grid: np.ndarray) -> str:
    return f"{grid.size} points in [{grid.min():.6g}, {grid.max():.6g}]"


def _finite_or_raise(values: np.ndarray, points: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise ModelEvaluationError(f"{what} is not finite at {points[tuple(idx)]!r}")


def validate_model(
    spec: ModelSpec,
    x_grid: Sequence[float] | np.ndarray | None = None,
    t_grid: Sequence[float] | np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
) -> ValidationReport:
    """Falsification check of the certified constants on a sample grid.

    Each check reports its worst violation (0 when satisfied everywhere).
    The gap ``|g(x_max) - sigma|`` is reported but never fails the model.
    """
    x = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float).ravel()
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float).ravel()
    if x.size == 0 or t.size == 0:
        raise ValueError("x_grid and t_grid must be nonempty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise ValueError("grids must be finite")
    if not tol > 0:
        raise ValueError("tol must be positive")

    X, T = np.meshgrid(x, t, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):  # non-finite values are reported just below
        f = np.asarray(spec.drift(X, T), dtype=float)
        g = np.asarray(spec.diffusion(x), dtype=float)
        g_mirror = np.asarray(spec.diffusion(-x), dtype=float)
    _finite_or_raise(f, np.stack([X, T], axis=-1), "drift")
    _finite_or_raise(g, x, "diffusion")
    _finite_or_raise(g_mirror, -x, "diffusion")

    xgrid = f"x: {_describe(x)}"
    xtgrid = f"x: {_describe(x)}; t: {_describe(t)}"
    checks = []

    xf = X * f
    v = float(max(0.0, np.max(xf - spec.rho)))
    checks.append(Check("sup x*f <= rho", xtgrid, v, v <= tol))

    g_sq = g * g
    zero_g = g == 0.0
    checks.append(
        Check("g != 0", xgrid, float(np.sum(zero_g)), not zero_g.any(), "violation = number of zeros")
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zero_g[:, None], np.inf, xf / g_sq[:, None])
    v = float(max(0.0, np.max(spec.mu - ratio)))
    checks.append(Check("inf x*f/g^2 >= mu", xtgrid, v, v <= tol))

    v = float(np.max(np.abs(g - g_mirror)))
    checks.append(Check("g even", xgrid, v, v <= tol))

    v_lo = float(max(0.0, np.max(spec.k1_sq - g_sq)))
    v_hi = float(max(0.0, np.max(g_sq - spec.k2_sq)))
    checks.append(Check("g^2 >= k1_sq", xgrid, v_lo, v_lo <= tol))
    checks.append(Check("g^2 <= k2_sq", xgrid, v_hi, v_hi <= tol))

    i_max = int(np.argmax(np.abs(x)))
    gap = float(abs(g[i_max] - spec.sigma))
    return ValidationReport(tuple(checks), tol, gap, float(abs(x[i_max])))
