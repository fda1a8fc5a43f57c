"""
Parameter sweeps, figure presets, and CSV emission
==================================================

The experiment harness evaluates (B, O, C, T) over a grid of one swept
parameter for a set of protocols and engines, and serializes plot-ready CSV.
Rows are emitted in deterministic order (grid value, then protocol, then
engine) and files are written atomically, so re-running a preset with the
same seed reproduces byte-identical CSV bodies. Timing lives in the in-memory
rows and the JSON manifest only, never in the CSV.

Figure presets encode the section-V evaluation sweeps. Their grids are read
off the published axes and documented as approximations: densities span the
visible density axis, distances span 1-10 m, and each preset pins the legend
parameters its figure varies. ``xi`` is accepted as a pseudo-parameter: it
rescales the interferer density to xi * l_A * zeta_A / l_B after all other
overrides, which is how the comparison figures tie the two field densities
together.

When a sweep runs both engines at a point, the harness cross-checks every
computed metric: the Monte Carlo row is stamped ``crosscheck`` when the
analytic value falls outside three standard errors plus a small absolute
floor (1e-6 relative to scale) that covers the analytic certification
tolerance. A crosscheck stamp is informational and does not fail the run.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .incident import incident_power_distribution
from .inversion import NumericsError
from .metrics import PROTOCOLS, ProtocolMetrics, evaluate_protocol
from .montecarlo import estimate
from .params import ConfigError, NetworkParams, normalize_config, table1_config

__all__ = [
    "SweepSpec",
    "FigurePreset",
    "PRESETS",
    "run_experiment",
    "emit_figure_dataset",
    "write_rows_csv",
    "csv_columns",
    "exit_code_for",
]

ENGINES = ("analytic", "mc")

# Fields a sweep may vary; "xi" is the density-ratio pseudo-parameter.
_SWEEPABLE = {
    "zeta_A", "zeta_B", "l_A", "l_B", "P_A", "P_B", "mu", "R", "d",
    "sigma2", "W", "omega", "beta", "varrho", "delta", "lam", "theta",
    "m", "tau_B", "tau_H", "rho_B", "rho_H", "T_B", "xi",
}

_METRIC_NAMES = ("O", "C", "T")
_CROSSCHECK_FLOOR = 1e-6   # absolute tolerance floor relative to metric scale


@dataclass(frozen=True)
class FigurePreset:
    """One published sweep: axis, grid, legend curves, protocols, metrics."""

    figure_id: str
    description: str
    sweep_key: str
    grid: tuple[float, ...]
    curves: tuple[Mapping[str, Any], ...]
    protocols: tuple[str, ...]
    metrics: tuple[str, ...]
    legend_keys: tuple[str, ...]


@dataclass
class SweepSpec:
    """A validated sweep request (single point when ``key`` is None)."""

    key: str | None
    values: tuple[float, ...]
    protocols: tuple[str, ...] = PROTOCOLS
    engines: tuple[str, ...] = ("analytic",)
    n_trials: int = 100_000
    seed: int = 12345
    workers: int = 1
    metrics: tuple[str, ...] = _METRIC_NAMES
    overrides: Mapping[str, Any] = field(default_factory=dict)
    strict_appendix: bool = False
    trace_dir: str | None = None
    label: str = "sweep"


def _validate_spec(spec: SweepSpec) -> None:
    problems: list[str] = []
    if spec.key is None:
        if spec.values:
            problems.append("single-point spec must not carry grid values")
    else:
        if spec.key not in _SWEEPABLE:
            problems.append(
                f"swept key {spec.key!r} is not a numeric model parameter; "
                f"choose one of {sorted(_SWEEPABLE)}")
        if len(spec.values) == 0:
            problems.append("sweep grid is empty")
        elif any(not v2 > v1 for v1, v2 in zip(spec.values, spec.values[1:])):
            problems.append("sweep grid must be strictly increasing")
    for proto in spec.protocols:
        if proto not in PROTOCOLS:
            problems.append(f"unknown protocol {proto!r}")
    for engine in spec.engines:
        if engine not in ENGINES:
            problems.append(f"unknown engine {engine!r}")
    for metric in spec.metrics:
        if metric not in _METRIC_NAMES:
            problems.append(f"unknown metric {metric!r}")
    if spec.n_trials < 1:
        problems.append(f"n_trials must be >= 1, got {spec.n_trials}")
    if spec.workers < 1:
        problems.append(f"workers must be >= 1, got {spec.workers}")
    if problems:
        raise ConfigError(problems)


def _apply_point(base: NetworkParams, overrides: Mapping[str, Any],
                 sweep_key: str | None, sweep_value: float | None,
                 strict_appendix: bool) -> NetworkParams:
    """Resolve one grid point: overrides, then the swept value, then xi."""
    merged: dict[str, Any] = dict(overrides)
    if sweep_key is not None:
        merged[sweep_key] = sweep_value
    xi_target = merged.pop("xi", None)

    fields: dict[str, Any] = {}
    for key, value in merged.items():
        if key == "alpha":
            fields[key] = value
        elif key == "m":
            as_float = float(value)
            if abs(as_float - round(as_float)) > 1e-9:
                raise ConfigError(f"m must take integer values, got {value}")
            fields[key] = int(round(as_float))
        else:
            fields[key] = float(value)
    params = base.replace(**fields) if fields else base

    if xi_target is not None:
        if params.l_B <= 0.0:
            raise ConfigError("xi override requires l_B > 0")
        zeta_b = float(xi_target) * params.l_A * params.zeta_A / params.l_B
        params = params.replace(zeta_B=zeta_b)
    if strict_appendix and not params.strict_appendix:
        params = params.replace(strict_appendix=True)
    return params


# =============================================================================
# Running
# =============================================================================

def _trace_path(spec: SweepSpec, point_index: int, protocol: str) -> str | None:
    if spec.trace_dir is None:
        return None
    name = f"trace_{spec.label}_{point_index}_{protocol}.csv"
    return os.path.join(spec.trace_dir, name)


def _crosscheck(analytic: ProtocolMetrics, mc: ProtocolMetrics) -> bool:
    """True when any shared metric disagrees beyond 3 standard errors."""
    pairs = [(analytic.B, mc.B, mc.B_err), (analytic.O, mc.O, mc.O_err),
             (analytic.C, mc.C, mc.C_err), (analytic.T, mc.T, mc.T_err)]
    for a_val, m_val, m_err in pairs:
        if a_val is None or math.isnan(a_val) or m_err is None:
            continue
        three_sigma = 3.0 * (m_err / 1.96)
        floor = _CROSSCHECK_FLOOR * max(1.0, abs(a_val))
        if abs(a_val - m_val) > three_sigma + floor:
            return True
    return False


def run_experiment(spec: SweepSpec, base_params: NetworkParams) -> list[dict]:
    """Evaluate the sweep; one row dict per (grid value, protocol, engine).

    Engine or configuration failures at a point are recorded in that row's
    ``status`` ("error: ...") without aborting the sweep. Rows carry the
    resolved parameter object under "_params" and timing under "wall_time_s";
    both are for in-process consumers and are omitted from CSV output.
    """
    _validate_spec(spec)
    points = spec.values if spec.key is not None else (None,)
    rows: list[dict] = []

    for point_index, value in enumerate(points):
        try:
            params = _apply_point(base_params, spec.overrides, spec.key,
                                  value, spec.strict_appendix)
            failure: Exception | None = None
        except (ConfigError, ValueError) as exc:
            params, failure = None, exc

        outcome: dict[tuple[str, str], Any] = {}
        timing: dict[tuple[str, str], float] = {}
        if failure is not None:
            for proto in spec.protocols:
                for engine in spec.engines:
                    outcome[(proto, engine)] = failure
                    timing[(proto, engine)] = 0.0
        else:
            if "analytic" in spec.engines:
                dist = incident_power_distribution(params)
                for proto in spec.protocols:
                    start = time.perf_counter()
                    try:
                        outcome[(proto, "analytic")] = evaluate_protocol(
                            dist, params, proto, spec.metrics)
                    except NumericsError as exc:
                        outcome[(proto, "analytic")] = exc
                    timing[(proto, "analytic")] = time.perf_counter() - start
            if "mc" in spec.engines:
                for proto in spec.protocols:
                    start = time.perf_counter()
                    try:
                        outcome[(proto, "mc")] = estimate(
                            params, proto, spec.n_trials, spec.seed,
                            workers=spec.workers,
                            trace_path=_trace_path(spec, point_index, proto))
                    except (NumericsError, ValueError) as exc:
                        outcome[(proto, "mc")] = exc
                    timing[(proto, "mc")] = time.perf_counter() - start

        if "analytic" in spec.engines and "mc" in spec.engines:
            for proto in spec.protocols:
                ana = outcome.get((proto, "analytic"))
                mc = outcome.get((proto, "mc"))
                if (isinstance(ana, ProtocolMetrics)
                        and isinstance(mc, ProtocolMetrics)
                        and mc.status == "ok" and _crosscheck(ana, mc)):
                    outcome[(proto, "mc")] = dataclasses.replace(
                        mc, status="crosscheck")

        for proto in spec.protocols:
            for engine in spec.engines:
                rows.append(_row(spec, value, proto, engine,
                                 outcome[(proto, engine)], params,
                                 timing[(proto, engine)]))
    return rows


def _row(spec: SweepSpec, value, protocol: str, engine: str, outcome,
         params: NetworkParams | None, wall_time: float) -> dict:
    row: dict[str, Any] = {} if spec.key is None else {spec.key: value}
    row.update({"protocol": protocol, "engine": engine})
    if isinstance(outcome, ProtocolMetrics):
        row.update({"B": outcome.B, "O": outcome.O, "C": outcome.C,
                    "T": outcome.T, "O_err": outcome.O_err,
                    "C_err": outcome.C_err, "T_err": outcome.T_err,
                    "status": outcome.status})
    else:
        row.update({"B": None, "O": None, "C": None, "T": None,
                    "O_err": None, "C_err": None, "T_err": None,
                    "status": f"error: {outcome}"})
    row.update({
        "seed": spec.seed,
        "params_hash": params.params_hash() if params is not None else "",
        "_params": params,
        "wall_time_s": wall_time,
    })
    return row


def exit_code_for(rows: list[dict]) -> int:
    """2 when any row failed to converge or errored, else 0."""
    for row in rows:
        status = str(row.get("status", ""))
        if status == "nonconverged" or status.startswith("error"):
            return 2
    return 0


# =============================================================================
# CSV output
# =============================================================================

def csv_columns(sweep_key: str | None,
                legend_keys: tuple[str, ...] = ()) -> list[str]:
    head = [] if sweep_key is None else [sweep_key]
    return (head + list(legend_keys)
            + ["protocol", "engine", "B", "O", "C", "T",
               "O_err", "C_err", "T_err", "status", "seed", "params_hash"])


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_rows_csv(rows: list[dict], columns: list[str], path: str) -> None:
    """Serialize rows (atomic replace); keys outside ``columns`` are dropped."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(col)) for col in columns))
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


# =============================================================================
# Figure presets
# =============================================================================

def _grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(lo, hi, n))


_DENSITY_GRID = _grid(0.002, 0.04, 20)
_COMPARE_GRID = _grid(0.01, 0.08, 8)
_DISTANCE_GRID = _grid(1.0, 10.0, 10)

_REPULSION_CURVES = ({"alpha": -1.0}, {"alpha": -0.5}, {"alpha": "poisson"})

PRESETS: dict[str, FigurePreset] = {
    "fig3": FigurePreset(
        figure_id="fig3",
        description=("Power-threshold energy outage vs energy-source density, "
                     "by repulsion factor and path-loss exponent"),
        sweep_key="zeta_A", grid=_DENSITY_GRID,
        curves=tuple({**c, "mu": mu} for mu in (3.0, 4.0)
                     for c in _REPULSION_CURVES),
        protocols=("ptp",), metrics=("O",), legend_keys=("alpha", "mu")),
    "fig4": FigurePreset(
        figure_id="fig4",
        description=("SNR-threshold energy outage vs energy-source density, "
                     "by transmission load and fading shape"),
        sweep_key="zeta_A", grid=_DENSITY_GRID,
        curves=({"l_A": 0.5, "m": 1}, {"l_A": 1.0, "m": 1},
                {"l_A": 0.5, "m": 4}, {"l_A": 1.0, "m": 4}),
        protocols=("stp",), metrics=("O",), legend_keys=("l_A", "m")),
    "fig5": FigurePreset(
        figure_id="fig5",
        description=("Power-threshold coverage vs energy-source density, "
                     "by repulsion factor, load, and fading shape"),
        sweep_key="zeta_A", grid=_DENSITY_GRID,
        curves=(*_REPULSION_CURVES,
                {"alpha": -1.0, "l_A": 0.5}, {"alpha": -1.0, "m": 4}),
        protocols=("ptp",), metrics=("C",), legend_keys=("alpha", "l_A", "m")),
    "fig6": FigurePreset(
        figure_id="fig6",
        description=("SNR-threshold coverage vs energy-source density, "
                     "by repulsion factor, load, and fading shape"),
        sweep_key="zeta_A", grid=_DENSITY_GRID,
        curves=(*_REPULSION_CURVES,
                {"alpha": -1.0, "l_A": 0.5}, {"alpha": -1.0, "m": 4}),
        protocols=("stp",), metrics=("C",), legend_keys=("alpha", "l_A", "m")),
    "fig7": FigurePreset(
        figure_id="fig7",
        description=("Coverage comparison of the hybrid protocols and the pure "
                     "baselines vs energy-source density, at two density ratios"),
        sweep_key="zeta_A", grid=_COMPARE_GRID,
        curves=({"xi": 0.2}, {"xi": 0.8}),
        protocols=PROTOCOLS, metrics=("C",), legend_keys=("xi",)),
    "fig8": FigurePreset(
        figure_id="fig8",
        description=("Energy-outage comparison of the hybrid protocols and the "
                     "pure baselines vs energy-source density"),
        sweep_key="zeta_A", grid=_DENSITY_GRID,
        curves=({},),
        protocols=PROTOCOLS, metrics=("O",), legend_keys=()),
    "fig9": FigurePreset(
        figure_id="fig9",
        description="Coverage vs backscattering efficiency at two densities",
        sweep_key="delta", grid=_grid(0.1, 1.0, 10),
        curves=({"zeta_A": 0.02}, {"zeta_A": 0.04}),
        protocols=PROTOCOLS, metrics=("C",), legend_keys=("zeta_A",)),
    "fig10": FigurePreset(
        figure_id="fig10",
        description="Coverage vs RF-to-DC conversion efficiency at two densities",
        sweep_key="beta", grid=_grid(0.3, 0.8, 11),
        curves=({"zeta_A": 0.02}, {"zeta_A": 0.04}),
        protocols=PROTOCOLS, metrics=("C",), legend_keys=("zeta_A",)),
    "fig11": FigurePreset(
        figure_id="fig11",
        description=("Coverage vs link distance at two density / density-ratio "
                     "pairs"),
        sweep_key="d", grid=_DISTANCE_GRID,
        curves=({"zeta_A": 0.02, "xi": 0.1}, {"zeta_A": 0.04, "xi": 0.6}),
        protocols=PROTOCOLS, metrics=("C",), legend_keys=("zeta_A", "xi")),
    "fig12": FigurePreset(
        figure_id="fig12",
        description=("Average throughput vs energy-source density at two "
                     "density ratios"),
        sweep_key="zeta_A", grid=_COMPARE_GRID,
        curves=({"xi": 0.2}, {"xi": 0.8}),
        protocols=PROTOCOLS, metrics=("T",), legend_keys=("xi",)),
    "fig13": FigurePreset(
        figure_id="fig13",
        description=("Average throughput vs link distance at two density-ratio "
                     "/ density pairs"),
        sweep_key="d", grid=_DISTANCE_GRID,
        curves=({"xi": 0.2, "zeta_A": 0.02}, {"xi": 0.8, "zeta_A": 0.01}),
        protocols=PROTOCOLS, metrics=("T",), legend_keys=("xi", "zeta_A")),
}


def _slug(value) -> str:
    return str(value).replace(".", "p").replace("-", "m")


def _curve_filename(preset: FigurePreset, curve: Mapping[str, Any],
                    protocol: str | None) -> str:
    parts = [preset.figure_id]
    if curve:
        parts.extend(f"{key}-{_slug(val)}" for key, val in curve.items())
    else:
        parts.append("base")
    if protocol is not None:
        parts.append(protocol)
    return "_".join(parts) + ".csv"


def emit_figure_dataset(figure_id: str, out_dir: str, *,
                        engines: tuple[str, ...] = ("analytic",),
                        n_trials: int = 100_000, seed: int = 12345,
                        workers: int = 1,
                        base_config: Mapping[str, Any] | None = None,
                        strict_appendix: bool = False,
                        trace_dir: str | None = None) -> dict:
    """Write one CSV per plotted curve plus a JSON manifest; returns manifest.

    The manifest carries provenance (resolved base configuration, seed, trial
    count, version, wall time, timestamps); CSV bodies stay byte-reproducible.
    """
    if figure_id not in PRESETS:
        raise ConfigError(
            f"unknown figure id {figure_id!r}; valid ids: "
            f"{', '.join(sorted(PRESETS, key=lambda s: int(s[3:])))}")
    preset = PRESETS[figure_id]
    os.makedirs(out_dir, exist_ok=True)
    raw = {**table1_config(), **(base_config or {})}
    base_params = normalize_config(raw)

    started = time.time()
    columns = csv_columns(preset.sweep_key, preset.legend_keys)
    manifest_curves = []
    all_rows: list[dict] = []
    for curve in preset.curves:
        spec = SweepSpec(key=preset.sweep_key, values=preset.grid,
                         protocols=preset.protocols, engines=engines,
                         n_trials=n_trials, seed=seed, workers=workers,
                         metrics=preset.metrics, overrides=curve,
                         strict_appendix=strict_appendix,
                         trace_dir=trace_dir,
                         label=_curve_filename(preset, curve, None)[:-4])
        rows = run_experiment(spec, base_params)
        for row in rows:
            params = row["_params"]
            for key in preset.legend_keys:
                row[key] = getattr(params, key) if params is not None else curve.get(key, "")
        all_rows.extend(rows)

        split = len(preset.protocols) > 1
        for protocol in (preset.protocols if split else (None,)):
            selected = (rows if protocol is None
                        else [r for r in rows if r["protocol"] == protocol])
            name = _curve_filename(preset, curve, protocol)
            write_rows_csv(selected, columns, os.path.join(out_dir, name))
            manifest_curves.append({
                "file": name,
                "legend": {k: str(v) for k, v in curve.items()},
                "protocol": protocol or preset.protocols[0],
                "rows": len(selected),
                "statuses": sorted({str(r["status"]) for r in selected}),
            })

    from . import __version__
    manifest = {
        "figure_id": figure_id,
        "description": preset.description,
        "sweep_key": preset.sweep_key,
        "grid": list(preset.grid),
        "protocols": list(preset.protocols),
        "metrics": list(preset.metrics),
        "engines": list(engines),
        "n_trials": n_trials,
        "seed": seed,
        "workers": workers,
        "strict_appendix": strict_appendix,
        "base_config": {k: raw[k] for k in sorted(raw)},
        "curves": manifest_curves,
        "tool_version": __version__,
        "created_unix": started,
        "wall_time_s": time.time() - started,
        "exit_code": exit_code_for(all_rows),
    }
    manifest_path = os.path.join(out_dir, f"{figure_id}_manifest.json")
    tmp = manifest_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, manifest_path)
    return manifest
