"""Asymptotic statistics of simulated paths.

LIL ratios with dyadic block maxima, occupation fractions below a level,
time averages of ``g^2`` along the lower comparison process, the
exponential functional ``F_c`` of the CIR transform, Kolmogorov-Smirnov
distances, and the full ensemble report.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import sim
from .model import ModelSpec
from .sim import CoupledStream, LilBlocks, PathGrid

# --------------------------------------------------------------------------
# law of the iterated logarithm


def lil_envelope(t):
    """``sqrt(2 t log log t)``; requires ``t > e``."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(2.0 * t * np.log(np.log(t)))


@dataclass(frozen=True)
class LilRecord:
    block_times: np.ndarray
    block_max_ratio: np.ndarray
    running_sup: np.ndarray
    normalizer: float

    @property
    def normalized_sup(self) -> np.ndarray:
        """Running sup divided by ``|sigma|``."""
        return self.running_sup / self.normalizer

    @property
    def final(self) -> float:
        return float(self.running_sup[-1] / self.normalizer)


def _record(times, block_max, sigma) -> LilRecord:
    if sigma == 0 or not math.isfinite(sigma):
        raise ValueError("sigma must be finite and nonzero")
    bm = np.asarray(block_max, dtype=float)
    return LilRecord(np.asarray(times, dtype=float), bm, np.maximum.accumulate(bm, axis=-1), abs(float(sigma)))


def lil_track(path: PathGrid | LilBlocks, sigma: float, t_start: float = 16.0) -> LilRecord | list[LilRecord]:
    """Block maxima of ``|X(t)| / sqrt(2 t log log t)`` over ``[t_start 2^(m-1), t_start 2^m]``.

    ``path`` is a stored single-path grid or streamed block maxima (which
    already fix their own ``t_start``); an ensemble of streamed paths gives
    one record per path.
    """
    if isinstance(path, LilBlocks):
        if path.block_max.shape[0] == 1:
            return _record(path.block_times, path.block_max[0], sigma)
        return [_record(path.block_times, row, sigma) for row in path.block_max]
    if path.values.ndim != 1:
        raise ValueError("lil_track takes a single path; use path.path(j)")
    t, x = path.t, path.values
    T = float(t[-1])
    times = sim.dyadic_block_times(t_start, T)  # validates t_start >= 16 and T >= 4 t_start
    dt = path.dt
    k0 = int(round(t_start / dt))
    ends = [int(round(b / dt)) for b in times[:-1]] + [t.size - 1]
    ratio = np.abs(x[k0:]) / lil_envelope(t[k0:])
    starts = [k0] + ends[:-1]
    bm = np.array([ratio[a - k0 : b - k0 + 1].max() for a, b in zip(starts, ends)])
    return _record(t[ends], bm, sigma)


# --------------------------------------------------------------------------
# occupation fractions and time averages


@dataclass(frozen=True)
class OccupationCurve:
    """``fraction[..., i, j]``: share of ``[0, times[j]]`` with the path at or below ``thresholds[i]``."""

    thresholds: np.ndarray
    times: np.ndarray
    fraction: np.ndarray

    def median(self) -> np.ndarray:
        return self.fraction if self.fraction.ndim == 2 else np.median(self.fraction, axis=0)


def _checkpoint_steps(checkpoints, dt: float, n: int) -> np.ndarray:
    cps = np.asarray(checkpoints, dtype=float)
    if cps.size == 0 or np.any(cps <= 0):
        raise ValueError("checkpoints must be positive")
    steps = np.rint(cps / dt).astype(np.int64)
    if np.any(steps > n) or np.any(steps < 1):
        raise ValueError("checkpoints must lie within the path horizon")
    return steps


def occupation_fractions(path: PathGrid | CoupledStream, c_list: Sequence[float], checkpoints=None) -> OccupationCurve:
    """Left-point grid counts of ``{path <= c}`` divided by the number of cells up to each checkpoint.

    For a stored grid the path is ``path.values`` (pass the ``z_l`` of a
    coupled triple wrapped in a PathGrid); for a streamed ensemble the
    counters of ``Z_L`` are used and ``c_list``/``checkpoints`` must be the
    ones it was run with.
    """
    c = np.asarray(c_list, dtype=float)
    if c.size == 0 or np.any(c <= 0):
        raise ValueError("thresholds must be positive")
    if isinstance(path, CoupledStream):
        if not np.array_equal(c, path.thresholds):
            raise ValueError("thresholds differ from the streamed run")
        frac = path.occ / path.checkpoint_steps[None, None, :]
        return OccupationCurve(c, path.checkpoints, frac)
    vals = np.atleast_2d(path.values)
    n = vals.shape[1] - 1
    if checkpoints is None:
        checkpoints = [path.t[-1]]
    steps = _checkpoint_steps(checkpoints, path.dt, n)
    below = vals[:, None, :-1] <= c[None, :, None]
    counts = np.cumsum(below, axis=-1)
    frac = counts[:, :, steps - 1] / steps[None, None, :]
    if path.values.ndim == 1:
        frac = frac[0]
    return OccupationCurve(c, steps * path.dt, frac)


def time_average_gsq(z_l: PathGrid | CoupledStream | np.ndarray, spec: ModelSpec, checkpoints=None, dt: float | None = None):
    """``theta(T) / T = (1/T) int_0^T g^2(sqrt Z_L) ds`` at each checkpoint."""
    if isinstance(z_l, CoupledStream):
        return z_l.theta_at / z_l.checkpoints[None, :]
    if isinstance(z_l, PathGrid):
        dt, vals = z_l.dt, z_l.values
    else:
        if dt is None:
            raise ValueError("dt is required with a bare array")
        vals = np.asarray(z_l, dtype=float)
    if vals.ndim != 1:
        raise ValueError("time_average_gsq takes a single path")
    tc = sim.time_change_of(vals, spec, dt)
    n = vals.size - 1
    if checkpoints is None:
        checkpoints = [n * dt]
    steps = _checkpoint_steps(checkpoints, dt, n)
    return tc.theta[steps] / tc.t[steps]


# --------------------------------------------------------------------------
# exponential functional of the CIR transform


def f_c_functional(u_path: PathGrid, c: float, horizon: float) -> float:
    """``F_c(h) = exp(-h) int_1^h exp(s) 1{U(s) <= c exp(-s)} ds``.

    The indicator is taken at the left grid point of each cell and
    ``exp(s)`` is integrated exactly over the part of the cell in ``[1, h]``.
    """
    if not horizon >= 1.0:
        raise ValueError("horizon must be >= 1")
    if not c > 0:
        raise ValueError("c must be positive")
    s, u = u_path.t, u_path.values
    if u.ndim != 1:
        raise ValueError("f_c_functional takes a single path")
    if horizon > s[-1] * (1.0 + 1e-12):
        raise ValueError("horizon exceeds the path")
    lo = np.clip(s[:-1], 1.0, horizon)
    hi = np.clip(s[1:], 1.0, horizon)
    ind = u[:-1] <= c * np.exp(-s[:-1])
    # exp(lo - h) and exp(hi - h) keep the weights in range for large horizons
    w = np.exp(hi - horizon) - np.exp(lo - horizon)
    return float(np.sum(w[ind]))


def f_c_from_areas(area_at: np.ndarray, targets: np.ndarray, horizons: Sequence[float]) -> np.ndarray:
    """``F_c`` from streamed time-below-``c`` counters.

    With ``U(s) = exp(-s) Z(exp(s) - 1)`` the indicator becomes ``Z(u) <= c``
    and ``F_c(h) = exp(-h) (A(exp(h) - 1) - A(e - 1))`` where ``A`` is the
    time the squared Bessel path spends below ``c``.  ``targets`` must hold
    ``e - 1`` followed by ``exp(h) - 1`` for each horizon.
    """
    h = np.asarray(horizons, dtype=float)
    want = np.concatenate([[math.e - 1.0], np.expm1(h)])
    if targets.size != want.size or not np.allclose(targets, want, rtol=1e-12, atol=0):
        raise ValueError("targets do not match the horizons")
    base = area_at[..., :1]
    return np.exp(-h) * (area_at[..., 1:] - base)


def f_c_targets(horizons: Sequence[float]) -> np.ndarray:
    return np.concatenate([[math.e - 1.0], np.expm1(np.asarray(horizons, dtype=float))])


# --------------------------------------------------------------------------
# distribution distance


def ks_distance(samples: Iterable[float], cdf: Callable) -> float:
    """``sup |F_n - F|`` evaluated on both sides of every sample jump."""
    x = np.sort(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_distance needs at least one sample")
    try:
        F = np.asarray(cdf(x), dtype=float)
        if F.shape != x.shape:
            raise ValueError
    except (TypeError, ValueError):
        F = np.array([float(cdf(v)) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# --------------------------------------------------------------------------
# ensembles


@dataclass
class PathStatistics:
    """Per-path results keyed by global path index.

    ``merge`` is a union of disjoint index sets, so it is associative and
    commutative; ``finalize`` orders the rows by path index.
    """

    rows: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)

    @classmethod
    def from_batch(cls, first_path: int, arrays: dict[str, np.ndarray]) -> "PathStatistics":
        m = next(iter(arrays.values())).shape[0]
        return cls({first_path + i: {k: np.asarray(v[i]) for k, v in arrays.items()} for i in range(m)})

    def merge(self, other: "PathStatistics") -> "PathStatistics":
        overlap = self.rows.keys() & other.rows.keys()
        if overlap:
            raise ValueError(f"path indices merged twice: {sorted(overlap)[:5]}")
        return PathStatistics({**self.rows, **other.rows})

    def finalize(self) -> dict[str, np.ndarray]:
        idx = sorted(self.rows)
        if not idx:
            return {}
        keys = self.rows[idx[0]].keys()
        return {k: np.stack([self.rows[i][k] for i in idx]) for k in keys}


def default_checkpoints(T: float) -> np.ndarray:
    cps = [10.0**k for k in range(1, 20) if 10.0**k < T * (1 - 1e-12)]
    return np.array(cps + [T])


def _median(a, axis=0):
    return np.median(a, axis=axis)


def _floats(a) -> list:
    return [float(v) for v in np.ravel(a)]


@dataclass(frozen=True)
class EnsembleReport:
    config: dict
    summary: dict
    checkpoint_rows: list[dict]
    block_rows: list[dict]

    def to_dict(self) -> dict:
        return {"config": self.config, "summary": self.summary,
                "checkpoints": self.checkpoint_rows, "blocks": self.block_rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def _csv(rows: list[dict]) -> str:
        if not rows:
            return ""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([format(r[c], ".17g") if isinstance(r[c], float) else r[c] for c in cols])
        return buf.getvalue()

    def checkpoints_csv(self) -> str:
        return self._csv(self.checkpoint_rows)

    def blocks_csv(self) -> str:
        return self._csv(self.block_rows)


def ensemble_report(
    spec: ModelSpec,
    T: float,
    dt: float,
    n_paths: int,
    seed: int,
    *,
    checkpoints=None,
    thresholds: Sequence[float] = (1.0, 10.0),
    f_horizons: Sequence[float] | None = None,
    t_start: float = 16.0,
    batch: int = 64,
    workers: int | None = None,
    backend: str | None = None,
) -> EnsembleReport:
    """Run the coupled ensemble in path batches and summarize every statistic.

    Batches are merged through :class:`PathStatistics`, so neither the batch
    size nor the worker count changes any number in the report.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    cps = default_checkpoints(T) if checkpoints is None else np.asarray(sorted(checkpoints), dtype=float)
    c_list = np.asarray(thresholds, dtype=float)
    if f_horizons is None:
        # horizons reached by every path: theta(T) >= k1_sq * T
        f_horizons = [h for h in (5.0, 8.0, 11.0) if math.expm1(h) <= spec.k1_sq * T]
    f_h = np.asarray(f_horizons, dtype=float)
    targets = f_c_targets(f_h) if f_h.size else np.zeros(0)
    acc = PathStatistics()
    result = None
    for first in range(0, n_paths, batch):
        m = min(batch, n_paths - first)
        result = sim.coupled_stream(
            spec, T, dt, seed, n_paths=m, first_path=first, checkpoints=cps, thresholds=c_list,
            theta_targets=targets, t_start=t_start, workers=workers, backend=backend,
        )
        acc = acc.merge(PathStatistics.from_batch(first, {
            "block_max": result.lil.block_max if result.lil else np.zeros((m, 0)),
            "occ": result.occ,
            "theta_at": result.theta_at,
            "theta_violations": result.theta_violations,
            "ordering_violations": result.ordering_violations,
            "area_at": result.area_at,
            "state_end": result.state_end,
        }))
    data = acc.finalize()
    cp_T = result.checkpoints
    frac = data["occ"] / result.checkpoint_steps[None, None, :]
    tavg = data["theta_at"] / cp_T[None, :]
    sig = abs(spec.sigma)
    summary: dict = {
        "ordering": {
            "tol": result.ordering_tol,
            "violating_points": int(data["ordering_violations"].sum()),
            "violating_paths": int((data["ordering_violations"] > 0).sum()),
        },
        "theta_bounds": {
            "violations": int(data["theta_violations"].sum()),
            "min_theta_over_t": float(tavg.min()),
            "max_theta_over_t": float(tavg.max()),
            "k1_sq": spec.k1_sq,
            "k2_sq": spec.k2_sq,
        },
        "occupation_median": {
            format(c, ".17g"): _floats(_median(frac[:, i, :])) for i, c in enumerate(c_list)
        },
        "time_average_gsq_median": _floats(_median(tavg)),
        "checkpoints": _floats(cp_T),
    }
    if f_h.size:
        fc = f_c_from_areas(data["area_at"], targets, f_h)
        summary["f_c"] = {
            "horizons": _floats(f_h),
            "median": {format(c, ".17g"): _floats(_median(fc[:, i, :])) for i, c in enumerate(c_list)},
        }
    block_rows: list[dict] = []
    if data["block_max"].shape[1]:
        bm = data["block_max"]
        run = np.maximum.accumulate(bm, axis=1)
        summary["lil"] = {
            "t_start": t_start,
            "normalizer": sig,
            "median_running_sup_normalized": float(np.median(run[:, -1]) / sig),
            "quartiles_running_sup_normalized": _floats(np.percentile(run[:, -1], [25, 75]) / sig),
        }
        times = result.lil.block_times
        med_b, med_r = _median(bm), _median(run)
        block_rows = [
            {"t": float(t), "median_block_max": float(b / sig), "median_running_sup": float(r / sig)}
            for t, b, r in zip(times, med_b, med_r)
        ]
    checkpoint_rows = []
    for j, t in enumerate(cp_T):
        row = {"t": float(t)}
        for i, c in enumerate(c_list):
            row[f"occupation_c{c:g}"] = float(np.median(frac[:, i, j]))
        row["time_average_gsq"] = float(np.median(tavg[:, j]))
        checkpoint_rows.append(row)
    config = {
        "model": spec.to_mapping(),
        "T": float(T),
        "dt": float(dt),
        "paths": int(n_paths),
        "seed": int(seed),
        "thresholds": _floats(c_list),
        "t_start": float(t_start),
    }
    return EnsembleReport(config, summary, checkpoint_rows, block_rows)
