"""Command-line interface.

Subcommands: synth, periodogram, estimate, select, experiment.
Exit codes: 0 on success, 2 on configuration errors, 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .estimator import FitOptions, lse_estimate
from .exceptions import ConfigError, MixSpec2DError
from .experiments import ExperimentConfig, run_experiment
from .io import dump_json, load_json, read_grid, write_grid, write_grid_csv
from .model import Field2D, InnovationSpec, MaCoefficients, ParamVector
from .selector import DEFAULT_Q_MAX, DEFAULT_XI_MARGIN, select_order, xi_threshold
from .spectrum import DEFAULT_PAD_FACTOR, periodogram, top_peaks
from .synth import synthesize_observation

__all__ = ["main"]


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_synth(args) -> int:
    doc = load_json(args.config)
    try:
        truth = ParamVector.from_jsonable(doc.get("truth", doc.get("params", [])))
        ma = MaCoefficients.from_jsonable(doc["ma"])
        innovation = InnovationSpec.from_jsonable(doc["innovation"], default_sigma2=ma.sigma2)
        n_rows, n_cols = int(doc["rows"]), int(doc["cols"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed synth config: {exc!r}") from exc
    if args.seed is not None:
        innovation = InnovationSpec(innovation.distribution, innovation.sigma2, args.seed)
    y = synthesize_observation(truth, ma, innovation, n_rows, n_cols)
    out = _out_dir(args)
    path = out / f"{args.name}.grid"
    write_grid(path, y)
    written = [str(path)]
    if args.csv:
        csv_path = out / f"{args.name}.csv"
        write_grid_csv(csv_path, y)
        written.append(str(csv_path))
    print("\n".join(written))
    return 0


def _cmd_periodogram(args) -> int:
    field = read_grid(args.grid)
    pg = periodogram(field, args.pad)
    peaks = top_peaks(pg, args.count) if args.count > 0 else []
    out = _out_dir(args)
    grid_path = out / "periodogram.grid"
    write_grid(grid_path, Field2D(pg.grid))
    peaks_path = out / "peaks.csv"
    with peaks_path.open("w") as fh:
        fh.write("rank,omega,upsilon,value\n")
        for rank, p in enumerate(peaks, start=1):
            fh.write(f"{rank},{p.omega!r},{p.upsilon!r},{p.value!r}\n")
    print(grid_path)
    print(peaks_path)
    return 0


def _cmd_estimate(args) -> int:
    field = read_grid(args.grid)
    result = lse_estimate(field, args.order, FitOptions(pad_factor=args.pad))
    doc = result.to_jsonable()
    out = _out_dir(args)
    path = out / "estimate.json"
    dump_json(path, doc)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_select(args) -> int:
    field = read_grid(args.grid)
    if args.xi == "auto":
        if args.ma is None:
            raise ConfigError(
                "--xi auto requires --ma with the noise coefficients; the penalty "
                "weight cannot be guessed from data"
            )
        ma = MaCoefficients.from_jsonable(load_json(args.ma))
        xi = xi_threshold(ma, args.margin)
    else:
        try:
            xi = float(args.xi)
        except ValueError as exc:
            raise ConfigError(f"--xi must be a number or 'auto', got {args.xi!r}") from exc
    result = select_order(field, args.qmax, xi, FitOptions(pad_factor=args.pad))
    out = _out_dir(args)
    dump_json(out / "selection.json", result.to_jsonable())
    with (out / "selection.csv").open("w") as fh:
        fh.write("\n".join(result.csv_rows()) + "\n")
    print(json.dumps(result.to_jsonable(), indent=2, sort_keys=True))
    return 0


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_jsonable(load_json(args.config))
    if args.seed is not None:
        innovation = InnovationSpec(
            config.innovation.distribution, config.innovation.sigma2, args.seed
        )
        doc = config.to_jsonable()
        doc["innovation"] = innovation.to_jsonable()
        config = ExperimentConfig.from_jsonable(doc)
    paths = run_experiment(config, out_dir=args.out_dir, threads=args.threads)
    for name in ("trials", "aggregate", "manifest"):
        print(paths[name])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixspec2d",
        description="Synthesize, analyze and model-order-select 2-D sinusoids in colored MA noise.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an observation field from a JSON config")
    p.add_argument("--config", required=True, help="JSON with truth, ma, innovation, rows, cols")
    p.add_argument("--seed", type=int, default=None, help="override the innovation master seed")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--name", default="field", help="basename of the written grid file")
    p.add_argument("--csv", action="store_true", help="also write a CSV copy of the field")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("periodogram", help="periodogram grid and top peaks of a field")
    p.add_argument("grid", help="input grid file")
    p.add_argument("--pad", type=int, default=DEFAULT_PAD_FACTOR, help="zero-padding factor")
    p.add_argument("--count", type=int, default=8, help="number of peaks to list")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_periodogram)

    p = sub.add_parser("estimate", help="least-squares fit at a fixed assumed order")
    p.add_argument("grid", help="input grid file")
    p.add_argument("--order", type=int, required=True, help="assumed number of sinusoids")
    p.add_argument("--pad", type=int, default=DEFAULT_PAD_FACTOR)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("select", help="select the number of sinusoids")
    p.add_argument("grid", help="input grid file")
    p.add_argument("--qmax", type=int, default=DEFAULT_Q_MAX, help="candidate orders 0..qmax-1")
    p.add_argument("--xi", required=True, help="penalty weight, or 'auto' (requires --ma)")
    p.add_argument("--ma", default=None, help="JSON file with the noise MA coefficients")
    p.add_argument("--margin", type=float, default=DEFAULT_XI_MARGIN, help="margin above the threshold for --xi auto")
    p.add_argument("--pad", type=int, default=DEFAULT_PAD_FACTOR)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("experiment", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out-dir", default=None, help="override the config's output_dir")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except MixSpec2DError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
