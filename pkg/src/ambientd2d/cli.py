"""
Command-line entry point
========================

Three run modes, selected by flags:

* ``--figure ID [ID ...]``  replays the published evaluation sweeps and
  writes plot-ready CSV plus a JSON manifest per figure.
* ``--sweep KEY=START:STOP:N``  evaluates a linear grid over one parameter.
* neither flag  evaluates the configured operating point and prints a table.

Exit codes: 0 success, 1 configuration or usage error, 2 when any result row
failed to converge or errored. ``crosscheck`` and ``low-confidence`` stamps
are informational and do not affect the exit code.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .metrics import PROTOCOLS
from .params import ConfigError, read_config, table1_config
from .params import normalize_config
from .sweeps import (PRESETS, SweepSpec, csv_columns, emit_figure_dataset,
                     exit_code_for, run_experiment, write_rows_csv)

_USAGE_EXIT = 1


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ambientd2d",
        description=("Analytic and Monte Carlo performance metrics for a "
                     "hybrid backscatter / harvest-then-transmit D2D link "
                     "powered by a random field of ambient RF sources."))
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="key=value file overriding the built-in defaults")
    parser.add_argument("--protocol", nargs="+", choices=PROTOCOLS,
                        default=None,
                        help="protocols to evaluate (default: all four)")
    parser.add_argument("--engine", choices=("analytic", "mc", "both"),
                        default="analytic", help="evaluation engine(s)")
    parser.add_argument("--sweep", metavar="KEY=START:STOP:N", default=None,
                        help="sweep one parameter over a linear grid")
    parser.add_argument("--figure", nargs="+", metavar="ID", default=None,
                        help=f"figure preset ids ({', '.join(sorted(PRESETS, key=lambda s: int(s[3:])))})")
    parser.add_argument("--trials", type=int, default=100_000,
                        help="Monte Carlo trials per point (default 100000)")
    parser.add_argument("--seed", type=int, default=12345,
                        help="base seed for the Monte Carlo engine")
    parser.add_argument("--workers", type=int, default=1,
                        help="processes for Monte Carlo chunks (default 1)")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="directory for CSV / manifest output")
    parser.add_argument("--strict-appendix", action="store_true",
                        help="use the literal printed interference and "
                             "mode-selection forms instead of the defaults")
    parser.add_argument("--dump-traces", action="store_true",
                        help="write per-trial Monte Carlo traces next to "
                             "the CSV output")
    return parser


def parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    """Parse KEY=START:STOP:N into a key and a linear grid."""
    key, sep, rest = text.partition("=")
    parts = rest.split(":")
    if not sep or not key or len(parts) != 3:
        raise ConfigError(
            f"sweep must look like KEY=START:STOP:N, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(
            f"sweep bounds must be numeric and N an integer, got {text!r}")
    if count < 1:
        raise ConfigError(f"sweep point count must be >= 1, got {count}")
    return key, tuple(float(v) for v in np.linspace(start, stop, count))


# =============================================================================
# Result table
# =============================================================================

def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return "-" if math.isnan(value) else f"{value:.6g}"
    return str(value)


def _print_rows(rows: list[dict], sweep_key: str | None) -> None:
    head = ([] if sweep_key is None else [sweep_key])
    head += ["protocol", "engine", "B", "O", "C", "T",
             "O_err", "C_err", "T_err", "status", "wall_s"]
    table = [head]
    for row in rows:
        cells = [] if sweep_key is None else [_cell(row[sweep_key])]
        cells += [row["protocol"], row["engine"], _cell(row["B"]),
                  _cell(row["O"]), _cell(row["C"]), _cell(row["T"]),
                  _cell(row["O_err"]), _cell(row["C_err"]),
                  _cell(row["T_err"]), str(row["status"]),
                  f"{row['wall_time_s']:.2f}"]
        table.append(cells)
    widths = [max(len(line[i]) for line in table) for i in range(len(head))]
    for line in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())


# =============================================================================
# Entry point
# =============================================================================

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        raw = table1_config()
        if args.config is not None:
            raw.update(read_config(args.config))
        engines = (("analytic", "mc") if args.engine == "both"
                   else (args.engine,))
        protocols = tuple(args.protocol) if args.protocol else PROTOCOLS
        out_dir = args.out
        trace_dir = (out_dir or ".") if args.dump_traces else None
        if args.trials < 1:
            raise ConfigError(f"--trials must be >= 1, got {args.trials}")
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")

        if args.figure is not None:
            code = 0
            target = out_dir or "."
            for figure_id in args.figure:
                manifest = emit_figure_dataset(
                    figure_id, target, engines=engines,
                    n_trials=args.trials, seed=args.seed,
                    workers=args.workers, base_config=raw,
                    strict_appendix=args.strict_appendix,
                    trace_dir=trace_dir)
                print(f"{figure_id}: {len(manifest['curves'])} curve files "
                      f"in {target} ({manifest['wall_time_s']:.1f} s)")
                code = max(code, manifest["exit_code"])
            return code

        base_params = normalize_config(raw)
        if args.strict_appendix:
            base_params = base_params.replace(strict_appendix=True)

        if args.sweep is not None:
            key, values = parse_sweep(args.sweep)
            spec = SweepSpec(key=key, values=values, protocols=protocols,
                             engines=engines, n_trials=args.trials,
                             seed=args.seed, workers=args.workers,
                             trace_dir=trace_dir, label=f"sweep_{key}")
            rows = run_experiment(spec, base_params)
            _print_rows(rows, key)
            if out_dir is not None:
                os.makedirs(out_dir, exist_ok=True)
                write_rows_csv(rows, csv_columns(key),
                               os.path.join(out_dir, f"sweep_{key}.csv"))
            return exit_code_for(rows)

        spec = SweepSpec(key=None, values=(), protocols=protocols,
                         engines=engines, n_trials=args.trials,
                         seed=args.seed, workers=args.workers,
                         trace_dir=trace_dir, label="point")
        rows = run_experiment(spec, base_params)
        print(f"params_hash={base_params.params_hash()}  seed={args.seed}")
        _print_rows(rows, None)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            write_rows_csv(rows, csv_columns(None),
                           os.path.join(out_dir, "point.csv"))
        return exit_code_for(rows)

    except ConfigError as exc:
        for violation in exc.violations:
            print(f"error: {violation}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
