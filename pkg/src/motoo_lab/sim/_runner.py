"""Kernel selection and path-parallel execution."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from types import ModuleType

import numpy as np

from .. import _backend

MAX_STORED_STEPS = 10_000_000


class SimulationError(ArithmeticError):
    """A path produced a non-finite state."""

    def __init__(self, path: int, step: int):
        super().__init__(f"non-finite state on path {path} at step {step}")
        self.path = path
        self.step = step


def kernels(backend: str | None = None) -> ModuleType:
    name = backend or _backend.BACKEND
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    raise ValueError(f"unknown backend {name!r}")


def n_steps(T: float, dt: float) -> int:
    """Number of Euler steps so that ``n * dt`` reaches ``T``."""
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive")
    if not (T >= dt and math.isfinite(T)):
        raise ValueError(f"need dt <= T, got T={T!r}, dt={dt!r}")
    return int(math.ceil(T / dt * (1.0 - 1e-12)))


def step_of(t: float, dt: float) -> int:
    return int(round(t / dt))


def run_chunked(kernel, keys: np.ndarray, per_path: list, args_before: tuple, args_after: tuple = (), *,
                workers: int | None = None, chunk: int | None = None) -> None:
    """Call ``kernel(keys[a:b], *args_before, *[o[a:b] for o in per_path], *args_after)`` over chunks.

    Every output in ``per_path`` is indexed by path along axis 0, so the
    partition into chunks and the thread schedule cannot change any value.
    """
    m = keys.size
    workers = workers or _backend.default_workers()
    if chunk is None:
        chunk = max(1, math.ceil(m / (4 * workers)))
    bounds = [(a, min(a + chunk, m)) for a in range(0, m, chunk)]

    def call(ab):
        a, b = ab
        kernel(keys[a:b], *args_before, *[o[a:b] for o in per_path], *args_after)

    if workers == 1 or len(bounds) == 1:
        for ab in bounds:
            call(ab)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(call, bounds))


def raise_on_bad(bad: np.ndarray, first_path: int = 0) -> None:
    idx = np.flatnonzero(bad >= 0)
    if idx.size:
        raise SimulationError(first_path + int(idx[0]), int(bad[idx[0]]))


def coefficient_args(spec) -> tuple:
    dp = np.zeros(3)
    dp[: len(spec.drift.params)] = spec.drift.params
    gp = np.zeros(3)
    gp[: len(spec.diffusion.params)] = spec.diffusion.params
    return spec.drift.code, dp, spec.diffusion.code, gp
