"""Compare the numba and numpy simulation kernels.

Both backends produce bit-identical output (checked here on every run), so
the only difference is speed.  Usage::

    python3 benchmarks/bench_kernels.py --paths 64 --T 100 --dt 0.01
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from motoo_lab import sim
from motoo_lab.model import reference_model


def _cases(paths: int, T: float, dt: float):
    spec = reference_model()
    return {
        "primary_paths": lambda b: sim.simulate_primary(spec, T, dt, 1, n_paths=paths, backend=b).values,
        "coupled_paths": lambda b: sim.simulate_coupled(spec, T, dt, 1, n_paths=paths, backend=b).z_l,
        "sqbessel_paths": lambda b: sim.simulate_sqbessel(1.0, 1.0, T, dt, 1, n_paths=paths, backend=b).values,
        "lil_stream": lambda b: sim.lil_blocks(spec, T, dt, 1, n_paths=paths, backend=b).block_max,
        "ensemble_stream": lambda b: sim.coupled_stream(
            spec, T, dt, 1, n_paths=paths, thresholds=(1.0, 10.0), backend=b
        ).theta_at,
        "sqbessel_stream": lambda b: sim.sqbessel_stream(
            1.0, 1.0, T, dt, 1, n_paths=paths, thresholds=(1.0,), backend=b
        ).u_sup,
    }


def _best_of(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--T", type=float, default=100.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    steps = args.paths * sim.n_steps(args.T, args.dt)
    print(f"{args.paths} paths x {steps // args.paths} steps = {steps:,} path-steps\n")
    print(f"{'kernel':<18}{'numba s':>10}{'numpy s':>10}{'ns/step nb':>12}{'ns/step np':>12}{'speedup':>9}")
    for name, case in _cases(args.paths, args.T, args.dt).items():
        case("numba")  # compile (or load the cache) outside the timing
        t_nb, out_nb = _best_of(lambda: case("numba"), args.repeat)
        t_np, out_np = _best_of(lambda: case("numpy"), args.repeat)
        if np.asarray(out_nb).tobytes() != np.asarray(out_np).tobytes():
            raise SystemExit(f"{name}: backends disagree")
        print(
            f"{name:<18}{t_nb:>10.3f}{t_np:>10.3f}{1e9 * t_nb / steps:>12.1f}{1e9 * t_np / steps:>12.1f}"
            f"{t_np / t_nb:>8.1f}x"
        )


if __name__ == "__main__":
    main()
