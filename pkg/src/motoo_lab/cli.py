"""``motoo-lab`` command line.

Exit status: 0 success, 1 validation failure, 2 numeric failure, 64 usage
error (unknown flag, family or malformed config).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from decimal import Decimal
from typing import Sequence

import numpy as np

from . import diffusion, sim, special, stats
from .config import ConfigError, ExperimentConfig, load_config
from .model import reference_model, validate_model
from .quadrature import QuadratureError

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("motoo_lab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write(text: str, path: str | None) -> None:
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.model) if args.model else ExperimentConfig(reference_model())
    cfg = cfg.with_run(
        T=getattr(args, "T", None), dt=getattr(args, "dt", None), paths=getattr(args, "paths", None),
        seed=getattr(args, "seed", None),
    )
    return cfg.with_output(path=getattr(args, "out", None), every=getattr(args, "every", None))


def _plain_args(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "fn"}


def _log_resolved(cfg: ExperimentConfig, command: str, **extra) -> None:
    payload = {"command": command, **cfg.to_dict(), **extra}
    log.info("resolved config: %s", json.dumps(payload, sort_keys=True))


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    cfg = _load(args)
    _log_resolved(cfg, "validate", tol=args.tol)
    report = validate_model(cfg.model, tol=args.tol)
    _write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", cfg.output.path or None)
    return EXIT_OK if report.passed else EXIT_INVALID


def _generator(args) -> diffusion.AutonomousDiffusion:
    if args.generator == "brownian":
        return diffusion.brownian_generator()
    if args.generator == "upper":
        return diffusion.upper_comparison_generator(args.rho, args.sigma)
    return diffusion.cir_generator(args.delta)


def _envelope(kind: str, a: float):
    if kind == "log":
        return lambda t: 2.0 * a * np.log(t)
    return lambda t: np.sqrt(2.0 * a * t * np.log(np.log(t)))


def cmd_classify(args) -> int:
    log.info("resolved config: %s", json.dumps({"command": "classify", **_plain_args(args)}, sort_keys=True))
    d = _generator(args)
    lo, hi = diffusion.scale_endpoints(d, args.c)
    flo, fhi = diffusion.feller_explosion_test(d, args.c)
    out = {
        "generator": args.generator,
        "c": args.c,
        "scale_endpoints": {"lower": lo.to_dict(), "upper": hi.to_dict()},
        "speed_measure_total": diffusion.speed_measure_total(d, args.c).to_dict(),
        "feller": {"lower": flo.to_dict(), "upper": fhi.to_dict()},
    }
    if args.envelope:
        t0 = args.t0 if args.t0 is not None else (math.e**2 if args.envelope == "log" else 16.0)
        try:
            v = diffusion.motoo_classify(d, args.c, _envelope(args.envelope, args.a), t0)
            out["motoo"] = {"envelope": args.envelope, "a": args.a, "t0": t0, **v.to_dict()}
        except diffusion.MotooPreconditionError as exc:
            out["motoo"] = {"envelope": args.envelope, "a": args.a, "t0": t0, "error": str(exc)}
    _write(json.dumps(out, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def _parse_grid(raw: str) -> np.ndarray:
    try:
        lo, hi, step = (Decimal(v.strip()) for v in raw.split(":"))
    except (ValueError, ArithmeticError):
        raise UsageError(f"--grid must be start:stop:step, got {raw!r}") from None
    if not step > 0 or hi < lo:
        raise UsageError("--grid needs step > 0 and stop >= start")
    n = int((hi - lo) // step)
    # decimal arithmetic keeps grid points such as 0.7 exact
    return np.array([float(lo + i * step) for i in range(n + 1)])


def cmd_density(args) -> int:
    log.info("resolved config: %s", json.dumps({"command": "density", **_plain_args(args)}, sort_keys=True))
    spec = special.DensitySpec.from_x0(args.delta, args.t, args.x0)
    ys = _parse_grid(args.grid)
    ys = ys[ys > 0]
    rows = ["y,density,cdf,tail_bound"]
    for y in ys:
        dens = special.sqbessel_density(spec, float(y))
        cdf = special.sqbessel_cdf(spec, float(y))
        try:
            bound = format(special.step_a_tail_bound(spec, float(y)), ".17g")
        except special.TailBoundPreconditionError:
            bound = ""
        rows.append(f"{y:.17g},{dens:.17g},{cdf:.17g},{bound}")
    _write("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    run, out = cfg.run, cfg.output
    _log_resolved(cfg, "simulate", coupled=args.coupled)
    every = out.every
    lines = []
    if args.coupled:
        tr = sim.simulate_coupled(cfg.model, run.T, run.dt, run.seed, n_paths=run.paths, workers=args.workers)
        lines.append("path,t,X,z_l,z,z_u,theta")
        for j in range(run.paths):
            x = np.atleast_2d(tr.x)[j]
            zl, z, zu = (np.atleast_2d(a)[j] for a in (tr.z_l, tr.z, tr.z_u))
            theta = sim.time_change_of(zl, cfg.model, run.dt).theta
            for k in range(0, x.size, every):
                lines.append(
                    f"{j},{tr.grid.t[k]:.17g},{x[k]:.17g},{zl[k]:.17g},{z[k]:.17g},{zu[k]:.17g},{theta[k]:.17g}"
                )
    else:
        g = sim.simulate_primary(cfg.model, run.T, run.dt, run.seed, n_paths=run.paths, workers=args.workers)
        lines.append("path,t,X")
        vals = np.atleast_2d(g.values)
        for j in range(run.paths):
            for k in range(0, g.t.size, every):
                lines.append(f"{j},{g.t[k]:.17g},{vals[j, k]:.17g}")
    _write("\n".join(lines) + "\n", out.path or None)
    return EXIT_OK


def cmd_lil_report(args) -> int:
    cfg = _load(args)
    run = cfg.run
    if run.T < 4 * run.t_start:
        raise UsageError(f"lil-report needs T >= 4 * t_start = {4 * run.t_start:g}")
    _log_resolved(cfg, "lil-report")
    rep = stats.ensemble_report(
        cfg.model, run.T, run.dt, run.paths, run.seed,
        checkpoints=run.checkpoints or None, thresholds=run.thresholds, t_start=run.t_start,
        workers=args.workers,
    )
    _write(rep.to_json() + "\n", cfg.output.path or None)
    prefix = args.csv or cfg.output.csv
    if prefix:
        _write(rep.checkpoints_csv(), f"{prefix}_checkpoints.csv")
        _write(rep.blocks_csv(), f"{prefix}_blocks.csv")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="motoo-lab", description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=None, help="worker threads (default: MOTOO_LAB_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="falsify the model constants on a sample grid")
    v.add_argument("--model", help="INI config (default: reference model)")
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--out")
    v.set_defaults(fn=cmd_validate)

    c = sub.add_parser("classify", help="scale, speed, Feller and Motoo verdicts for a generator")
    c.add_argument("--generator", choices=("brownian", "upper", "cir"), default="cir")
    c.add_argument("--rho", type=float, default=1.0)
    c.add_argument("--sigma", type=float, default=1.0)
    c.add_argument("--delta", type=float, default=1.0)
    c.add_argument("--c", type=float, default=1.0, help="reference point of the scale function")
    c.add_argument("--envelope", choices=("lil", "log"), help="h(t) = sqrt(2a t log log t) or 2a log t")
    c.add_argument("--a", type=float, default=1.0)
    c.add_argument("--t0", type=float)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_classify)

    d = sub.add_parser("density", help="squared Bessel density, CDF and tail bound as CSV")
    d.add_argument("--delta", type=float, required=True)
    d.add_argument("--t", type=float, required=True)
    d.add_argument("--x0", type=float, default=0.0, help="initial value x0 (the process starts at x0^2)")
    d.add_argument("--grid", required=True, help="start:stop:step")
    d.add_argument("--out")
    d.set_defaults(fn=cmd_density)

    s = sub.add_parser("simulate", help="write Euler paths as CSV")
    s.add_argument("--model")
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--paths", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--coupled", action="store_true", help="also emit z_l, z, z_u and theta")
    s.add_argument("--every", type=int, help="keep every k-th grid point")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_simulate)

    r = sub.add_parser("lil-report", help="streamed ensemble report (JSON + CSV)")
    r.add_argument("--model")
    r.add_argument("--T", type=float)
    r.add_argument("--dt", type=float)
    r.add_argument("--paths", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--csv", help="prefix for <prefix>_checkpoints.csv and <prefix>_blocks.csv")
    r.set_defaults(fn=cmd_lil_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.workers is not None and args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except (UsageError, ConfigError) as exc:
        print(f"motoo-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, sim.SimulationError, special.BesselRangeError, ArithmeticError) as exc:
        print(f"motoo-lab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"motoo-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
