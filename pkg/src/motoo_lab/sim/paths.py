"""Stored Euler paths: the primary SDE, the coupled comparison triple and
the squared Bessel process, plus the time change and the CIR transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import rng
from ..model import ModelSpec
from ._runner import (
    MAX_STORED_STEPS,
    coefficient_args,
    kernels,
    n_steps,
    raise_on_bad,
    run_chunked,
)


@dataclass(frozen=True)
class PathGrid:
    """Times ``t`` (uniform step ``dt`` from 0) and aligned states.

    ``values`` is 1-D for a single path and ``(n_paths, len(t))`` otherwise;
    ``dW`` has one column fewer.  ``dW`` is None for transformed grids.
    """

    t: np.ndarray
    values: np.ndarray
    dW: np.ndarray | None
    seed: int
    clip_count: np.ndarray | int | None = None

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def n_paths(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def path(self, j: int) -> "PathGrid":
        """The single-path grid of path ``j``."""
        if self.values.ndim == 1:
            if j != 0:
                raise IndexError(j)
            return self
        clips = None if self.clip_count is None else int(np.asarray(self.clip_count)[j])
        return PathGrid(self.t, self.values[j], None if self.dW is None else self.dW[j], self.seed, clips)


@dataclass(frozen=True)
class CoupledTriple:
    """Lower comparison, squared primary and upper comparison on one driver."""

    grid: PathGrid  # grid.values holds the primary path X
    z_l: np.ndarray
    z: np.ndarray
    z_u: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.grid.values

    def ordering_violations(self, tol: float | None = None) -> np.ndarray:
        """Per-path count of grid points where ``z_l <= z <= z_u`` fails by more than ``tol``.

        The default tolerance is ``10 sqrt(dt)``.
        """
        if tol is None:
            tol = 10.0 * math.sqrt(self.grid.dt)
        bad = (self.z_l > self.z + tol) | (self.z > self.z_u + tol)
        return bad.sum(axis=-1)


def _grid(n: int, dt: float) -> np.ndarray:
    return np.arange(n + 1) * dt


def _check_storage(n: int) -> None:
    if n > MAX_STORED_STEPS:
        raise ValueError(
            f"{n} steps per path exceeds the stored-path limit of {MAX_STORED_STEPS}; "
            "use the streamed ensembles in motoo_lab.sim.stream"
        )


def _squeeze(a: np.ndarray, n_paths: int) -> np.ndarray:
    return a[0] if n_paths == 1 else a


def simulate_primary(
    spec: ModelSpec,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> PathGrid:
    """Euler-Maruyama paths ``X[k+1] = X[k] + f(X[k], t_k) dt + g(X[k]) dW[k]``.

    Path ``j`` uses RNG key ``seed ^ (first_path + j)``.
    """
    n = n_steps(T, dt)
    _check_storage(n)
    keys = rng.path_keys(seed, n_paths, first_path)
    X = np.empty((n_paths, n + 1))
    dW = np.empty((n_paths, n))
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).primary_paths, keys, [X, dW, bad],
        (float(spec.x0), n, float(dt), *coefficient_args(spec)), workers=workers,
    )
    raise_on_bad(bad, first_path)
    return PathGrid(_grid(n, dt), _squeeze(X, n_paths), _squeeze(dW, n_paths), seed)


def simulate_coupled(
    spec: ModelSpec,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> CoupledTriple:
    """Primary path with ``Z = X^2`` and the comparison processes on the same driver.

    ``Z_u`` (start ``1 + x0^2``) has drift ``2 rho + g^2(sqrt Z_u)``, ``Z_L``
    (start ``x0^2``) has drift ``delta g^2(sqrt Z_L)``; both are driven by
    ``gamma(X[k]) dW[k]`` with ``gamma(0) = +1`` and use full truncation.
    """
    n = n_steps(T, dt)
    _check_storage(n)
    keys = rng.path_keys(seed, n_paths, first_path)
    X, ZL, Z, ZU = (np.empty((n_paths, n + 1)) for _ in range(4))
    dW = np.empty((n_paths, n))
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).coupled_paths, keys, [X, ZL, Z, ZU, dW, bad],
        (float(spec.x0), n, float(dt), *coefficient_args(spec), float(spec.rho), float(spec.delta)),
        workers=workers,
    )
    raise_on_bad(bad, first_path)
    grid = PathGrid(_grid(n, dt), _squeeze(X, n_paths), _squeeze(dW, n_paths), seed)
    return CoupledTriple(grid, _squeeze(ZL, n_paths), _squeeze(Z, n_paths), _squeeze(ZU, n_paths))


def _check_sqbessel(delta: float, x0_sq: float) -> None:
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not x0_sq >= 0:
        raise ValueError("x0_sq must be nonnegative")


def simulate_sqbessel(
    delta: float,
    x0_sq: float,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    workers: int | None = None,
    backend: str | None = None,
) -> PathGrid:
    """Full-truncation Euler paths of ``dZ = delta dt + 2 sqrt(Z) dW``.

    ``clip_count`` counts the steps where the update went negative and was
    reset to 0.  The stored grid carries no ``dW`` (the draws are
    regenerable from the seed).
    """
    _check_sqbessel(delta, x0_sq)
    n = n_steps(T, dt)
    _check_storage(n)
    keys = rng.path_keys(seed, n_paths, first_path)
    Z = np.empty((n_paths, n + 1))
    clips = np.zeros(n_paths, dtype=np.int64)
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).sqbessel_paths, keys, [Z, clips, bad],
        (float(delta), float(x0_sq), n, float(dt)), workers=workers,
    )
    raise_on_bad(bad, first_path)
    return PathGrid(_grid(n, dt), _squeeze(Z, n_paths), None, seed, _squeeze(clips, n_paths))


@dataclass(frozen=True)
class TimeChange:
    """``theta[k] = dt * sum_{j<k} g^2(sqrt Z_L[j])`` and its inverse."""

    t: np.ndarray
    theta: np.ndarray

    def tau_of(self, u):
        """Piecewise-linear inverse of theta (values outside the range are clamped)."""
        return np.interp(u, self.theta, self.t)


def time_change_of(z_l: np.ndarray, spec: ModelSpec, dt: float) -> TimeChange:
    """Left-endpoint clock of a (single-path) lower comparison process."""
    z_l = np.asarray(z_l, dtype=float)
    if z_l.ndim != 1 or z_l.size < 2:
        raise ValueError("z_l must be a 1-D path with at least two points")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.any(~np.isfinite(z_l)) or np.any(z_l < 0):
        raise ValueError("z_l must be finite and nonnegative")
    g = spec.diffusion(np.sqrt(z_l[:-1]))
    theta = np.concatenate([[0.0], np.cumsum(g * g) * dt])
    return TimeChange(np.arange(z_l.size) * dt, theta)


def u_transform(ztilde: PathGrid, horizon: float | None = None, ds: float | None = None) -> PathGrid:
    """``U(s) = exp(-s) Z~(exp(s) - 1)`` on a uniform grid ``0, ds, ..., horizon``.

    ``Z~`` is interpolated linearly; the default step ``ds`` is the step of
    the input grid and the default horizon is ``log(1 + T)``.
    """
    t = ztilde.t
    T = float(t[-1])
    s_max = math.log1p(T)
    if horizon is None:
        horizon = s_max
    if horizon > s_max * (1.0 + 1e-12):
        raise ValueError(f"U horizon {horizon!r} exceeds log(1 + T) = {s_max!r} of the input path")
    if ds is None:
        ds = ztilde.dt
    n = max(1, int(math.floor(horizon / ds * (1.0 + 1e-12))))
    s = np.arange(n + 1) * ds
    u = np.minimum(np.expm1(s), T)
    vals = ztilde.values
    if vals.ndim == 1:
        out = np.exp(-s) * np.interp(u, t, vals)
    else:
        out = np.exp(-s) * np.stack([np.interp(u, t, row) for row in vals])
    return PathGrid(s, out, None, ztilde.seed)
