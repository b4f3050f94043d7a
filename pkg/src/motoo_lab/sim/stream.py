"""Streamed ensembles for horizons too long to store.

Each function runs the paths ``first_path .. first_path + n_paths - 1``
and returns per-path statistics only (O(1) memory per path per statistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import rng
from ..model import ModelSpec
from ._runner import coefficient_args, kernels, n_steps, raise_on_bad, run_chunked, step_of

LIL_T_START = 16.0
U_S_START = math.log(17.0)


def dyadic_block_times(t_start: float, T: float) -> np.ndarray:
    """``t_start * 2^m`` for m >= 1 below ``T``, then ``T`` itself."""
    if not t_start >= 16.0:
        raise ValueError("t_start must be >= 16 so that log log t > 0")
    if not T >= 4.0 * t_start:
        raise ValueError(f"horizon T={T!r} must be at least 4 * t_start = {4 * t_start!r}")
    times = []
    t = 2.0 * t_start
    while t < T * (1.0 - 1e-12):
        times.append(t)
        t *= 2.0
    times.append(T)
    return np.array(times)


def _block_steps(t_start: float, T: float, dt: float, n: int) -> tuple[int, np.ndarray, np.ndarray]:
    times = dyadic_block_times(t_start, T)
    ends = np.array([step_of(t, dt) for t in times], dtype=np.int64)
    ends[-1] = n
    return step_of(t_start, dt), ends, ends * dt


@dataclass(frozen=True)
class LilBlocks:
    """Per-path block maxima of ``|X(t)| / sqrt(2 t log log t)``."""

    t_start: float
    block_times: np.ndarray
    block_max: np.ndarray  # (n_paths, n_blocks)
    x_end: np.ndarray
    seed: int
    dt: float


def lil_blocks(
    spec: ModelSpec,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    t_start: float = LIL_T_START,
    workers: int | None = None,
    backend: str | None = None,
) -> LilBlocks:
    n = n_steps(T, dt)
    k_start, ends, times = _block_steps(t_start, T, dt, n)
    keys = rng.path_keys(seed, n_paths, first_path)
    block_max = np.zeros((n_paths, ends.size))
    x_end = np.empty(n_paths)
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).lil_stream, keys, [block_max, x_end, bad],
        (float(spec.x0), n, float(dt), *coefficient_args(spec), k_start, ends), workers=workers,
    )
    raise_on_bad(bad, first_path)
    return LilBlocks(float(t_start), times, block_max, x_end, seed, float(dt))


@dataclass(frozen=True)
class CoupledStream:
    """Per-path statistics of a streamed coupled ensemble.

    ``occ[i, c, j]`` is the number of left grid points before
    ``checkpoints[j]`` with ``Z_L <= thresholds[c]``; ``theta_at[i, j]`` is
    the clock at ``checkpoints[j]``; ``area_at[i, c, h]`` is the
    theta-measure of ``{Z_L <= thresholds[c]}`` up to ``theta_targets[h]``.
    """

    lil: LilBlocks | None  # None when T < 4 * t_start
    checkpoints: np.ndarray
    thresholds: np.ndarray
    occ: np.ndarray
    theta_at: np.ndarray
    theta_violations: np.ndarray
    theta_targets: np.ndarray
    area_at: np.ndarray
    ordering_violations: np.ndarray
    ordering_tol: float
    state_end: np.ndarray  # columns x, z_l, z, z_u
    checkpoint_steps: np.ndarray


def coupled_stream(
    spec: ModelSpec,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    checkpoints=None,
    thresholds=(1.0,),
    theta_targets=(),
    t_start: float = LIL_T_START,
    ordering_tol: float | None = None,
    workers: int | None = None,
    backend: str | None = None,
) -> CoupledStream:
    n = n_steps(T, dt)
    if T >= 4.0 * t_start:
        k_start, ends, times = _block_steps(t_start, T, dt, n)
    else:  # too short for LIL blocks; the other statistics still apply
        k_start, ends, times = n + 1, np.zeros(0, dtype=np.int64), np.zeros(0)
    cps = np.array([T] if checkpoints is None else sorted(checkpoints), dtype=float)
    if cps.size == 0 or cps[0] <= 0 or cps[-1] > n * dt * (1 + 1e-12):
        raise ValueError("checkpoints must lie in (0, T]")
    cp_steps = np.array([max(1, step_of(c, dt)) for c in cps], dtype=np.int64)
    c_list = np.asarray(thresholds, dtype=float)
    if c_list.size == 0 or np.any(c_list <= 0):
        raise ValueError("thresholds must be positive")
    targets = np.sort(np.asarray(theta_targets, dtype=float))
    tol = 10.0 * math.sqrt(dt) if ordering_tol is None else float(ordering_tol)
    keys = rng.path_keys(seed, n_paths, first_path)
    block_max = np.zeros((n_paths, ends.size))
    violations = np.zeros(n_paths, dtype=np.int64)
    occ = np.zeros((n_paths, c_list.size, cp_steps.size), dtype=np.int64)
    theta_cp = np.zeros((n_paths, cp_steps.size))
    theta_viol = np.zeros(n_paths, dtype=np.int64)
    a_at = np.full((n_paths, c_list.size, targets.size), np.nan)
    state_end = np.zeros((n_paths, 4))
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).ensemble_stream, keys,
        [block_max, violations, occ, theta_cp, theta_viol, a_at, state_end, bad],
        (
            float(spec.x0), n, float(dt), *coefficient_args(spec), float(spec.rho), float(spec.delta),
            float(spec.k1_sq), float(spec.k2_sq), tol, k_start, ends, cp_steps, c_list, targets,
        ),
        workers=workers,
    )
    raise_on_bad(bad, first_path)
    lil = LilBlocks(float(t_start), times, block_max, state_end[:, 0].copy(), seed, float(dt)) if ends.size else None
    return CoupledStream(
        lil, cp_steps * dt, c_list, occ, theta_cp, theta_viol, targets, a_at, violations, tol, state_end, cp_steps
    )


@dataclass(frozen=True)
class SqBesselStream:
    """Per-path endpoint, clip count, U-envelope sup and time below thresholds."""

    z_end: np.ndarray
    clips: np.ndarray
    u_sup: np.ndarray
    s_start: float
    thresholds: np.ndarray
    targets: np.ndarray
    area_at: np.ndarray
    T: float
    dt: float


def sqbessel_stream(
    delta: float,
    x0_sq: float,
    T: float,
    dt: float,
    seed: int,
    *,
    n_paths: int = 1,
    first_path: int = 0,
    s_start: float = U_S_START,
    thresholds=(),
    targets=(),
    workers: int | None = None,
    backend: str | None = None,
) -> SqBesselStream:
    """Stream squared Bessel paths.

    ``u_sup`` is the max of ``U(s) / (2 log s)`` over grid points with
    ``s = log(1 + t) >= s_start``; ``area_at[i, c, j]`` is the time with
    ``Z <= thresholds[c]`` on ``[0, targets[j]]``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not x0_sq >= 0:
        raise ValueError("x0_sq must be nonnegative")
    if not s_start > 0:
        raise ValueError("s_start must be positive (log s must be defined)")
    n = n_steps(T, dt)
    k_start = int(math.ceil(math.expm1(s_start) / dt * (1.0 - 1e-12)))
    c_list = np.asarray(thresholds, dtype=float)
    tg = np.sort(np.asarray(targets, dtype=float))
    if tg.size and tg[-1] > n * dt * (1 + 1e-12):
        raise ValueError("targets must lie within the horizon")
    keys = rng.path_keys(seed, n_paths, first_path)
    z_end = np.empty(n_paths)
    clips = np.zeros(n_paths, dtype=np.int64)
    u_sup = np.zeros(n_paths)
    a_at = np.full((n_paths, c_list.size, tg.size), np.nan)
    bad = np.full(n_paths, -1, dtype=np.int64)
    run_chunked(
        kernels(backend).sqbessel_stream, keys, [z_end, clips, u_sup, a_at, bad],
        (float(delta), float(x0_sq), n, float(dt), k_start, c_list, tg), workers=workers,
    )
    raise_on_bad(bad, first_path)
    return SqBesselStream(z_end, clips, u_sup, float(s_start), c_list, tg, a_at, n * dt, float(dt))


def sqbessel_endpoints(delta, x0_sq, T, dt, seed, *, n_paths, first_path=0, workers=None, backend=None):
    """Endpoints ``Z(T)`` of ``n_paths`` squared Bessel paths."""
    return sqbessel_stream(
        delta, x0_sq, T, dt, seed, n_paths=n_paths, first_path=first_path, s_start=math.log1p(T) + 1.0,
        workers=workers, backend=backend,
    ).z_end
