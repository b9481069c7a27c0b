"""Command-line entry point: ``lwrctl <subcommand> <config> ...``.

Exit codes: 0 success, 1 config error, 2 runtime or solver error,
3 oracle-check mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from .audit import oracle_audit
from .export import export_csv, export_plots
from .flux import FluxError, convexity_split, validate_flux
from .scenario import ConfigError, ScenarioConfig, load_config, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3


def _load(path, **overrides) -> ScenarioConfig:
    try:
        return load_config(path, **overrides)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None


def _fmt_set(intervals) -> str:
    return " U ".join(f"[{lo:.12g}, {hi:.12g}]" for lo, hi in intervals) or "(empty)"


def _run_one(config: ScenarioConfig, out_dir: Path, plots: bool) -> List[Path]:
    result = run_scenario(config)
    files = export_csv(result, out_dir / "timeseries.csv")
    if plots:
        files += export_plots(result, out_dir)
    return files


def cmd_run(args) -> int:
    config = _load(args.config)
    out_dir = Path(args.out or config.out_dir)
    files = _run_one(config, out_dir, not args.no_plots)
    print(f"wrote {len(files)} files to {out_dir}")
    return EXIT_OK


def cmd_intervals(args) -> int:
    config = _load(args.config)
    model = config.build_flux()
    cab = convexity_split(model, config.u_star)
    iab = convexity_split(model, 0.0)
    print(f"u_hat = {model.u_hat:.12g}")
    print(f"u1 = {cab.split_point:.12g}" if cab.split_point is not None else "u1 = none")
    print(f"u2 = {iab.split_point:.12g}" if iab.split_point is not None else "u2 = none")
    print(f"C_a = {_fmt_set(cab.left_set)}")
    print(f"C_b = {_fmt_set(cab.right_set)}")
    print(f"I_a = {_fmt_set(iab.left_set)}")
    print(f"I_b = {_fmt_set(iab.right_set)}")
    return EXIT_OK


def cmd_validate_flux(args) -> int:
    config = _load(args.config)
    report = validate_flux(config.build_flux())
    print(f"flux {config.flux}: {'valid' if report.passed else 'INVALID'}")
    print(report)
    return EXIT_OK if report.passed else EXIT_CONFIG


def cmd_oracle_check(args) -> int:
    config = _load(args.config)
    model = config.build_flux()
    sides = ("left", "right") if args.side == "both" else (args.side,)
    status = EXIT_OK
    for side in sides:
        res = oracle_audit(
            model, side, args.samples, seed=args.seed, resolution=args.resolution,
            u_star=None if args.random_u_star else config.u_star,
        )
        print(
            f"{side:5s} samples={res.samples} feasible={res.feasible} "
            f"mismatches={len(res.mismatches)} max_gap={res.max_value_gap:.3e}"
        )
        for m in res.mismatches[:10]:
            print(f"  mismatch: {m}")
        if not res.passed:
            status = EXIT_MISMATCH
    return status


def _sweep_job(job):
    config, out_dir, plots = job
    _run_one(config, out_dir, plots)
    return str(out_dir)


def cmd_sweep(args) -> int:
    base = _load(args.config)
    jobs = []
    for raw in args.values:
        value = yaml.safe_load(raw)
        config = _load(args.config, **{args.param: value})
        jobs.append((config, Path(args.out or base.out_dir) / f"{args.param}={raw}", not args.no_plots))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            done = list(pool.map(_sweep_job, jobs))
    else:
        done = [_sweep_job(j) for j in jobs]
    for d in done:
        print(f"wrote {d}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lwrctl", description="Boundary control of the LWR traffic PDE.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-step diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and export CSV and SVG")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides out_dir)")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    i = sub.add_parser("intervals", help="print split points and convexity intervals")
    i.add_argument("config")
    i.set_defaults(func=cmd_intervals)

    v = sub.add_parser("validate-flux", help="check the flux assumptions")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate_flux)

    o = sub.add_parser("oracle-check", help="randomized solver vs grid-oracle audit")
    o.add_argument("config")
    o.add_argument("--samples", type=int, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--side", choices=("left", "right", "both"), default="both")
    o.add_argument("--resolution", type=int, default=100_000)
    o.add_argument("--random-u-star", action="store_true", help="draw u_star per instance")
    o.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("sweep", help="batch runs over one config key")
    s.add_argument("config")
    s.add_argument("--param", required=True)
    s.add_argument("--values", nargs="+", required=True)
    s.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    s.add_argument("--out", help="parent output directory")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FluxError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - map everything else to the runtime code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
