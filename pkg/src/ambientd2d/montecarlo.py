"""
Monte Carlo engine: two-phase slot simulation
=============================================

Estimates the same (B, O, C, T) metrics as the analytic engine by simulating
complete transmission slots. Each trial runs two statistically independent
phases, mirroring the one-shot mode-selection semantics the analytic product
forms assume:

* Phase 1 (selection): draw the ambient field and fading, compute the
  selection-phase incident power, and apply the protocol's mode rule
  (power-threshold: backscatter unless the harvest could run the active
  circuitry; SNR-threshold: backscatter when a trial backscatter link both
  clears tau_B and harvests above rho_B).
* Phase 2 (operation): redraw everything independently, then evaluate energy
  outage, SNR/SINR, coverage, and rate in the selected mode. The interferer
  field is drawn only in active mode after the powered check, which makes
  per-trial energy outage exactly invariant to the interferer density.

Determinism: trial k uses a Philox generator seeded from (seed, spawn_key=k),
and trials are aggregated in fixed-size chunks merged in chunk order, so
estimates are bit-identical for any worker count and across reruns.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import ProtocolMetrics, PROTOCOLS
from .params import NetworkParams
from .pointfield import sample_field

__all__ = ["SlotSample", "draw_slot_sample", "estimate", "run_baseline"]

_CHUNK = 1024            # trials per aggregation chunk (fixed: determinism)
_LOW_CONFIDENCE_N = 100  # below this, normal-approximation CIs are dubious
_Z95 = 1.96

_FORCED_MODE = {"pure-bs": "backscatter", "pure-htt": "htt"}

_TRACE_COLUMNS = ("trial", "mode", "P_I_select", "P_I_op",
                  "snr_or_sinr", "covered", "rate")


@dataclass(frozen=True)
class SlotSample:
    """Outcome of one simulated slot."""

    mode: str              # "backscatter" or "htt"
    P_I_select: float      # selection-phase incident power (NaN if mode forced)
    P_I_op: float          # operation-phase incident power
    Q: float               # aggregate interference power at the receiver
    energy_outage: bool
    snr_or_sinr: float
    covered: bool
    rate: float


def _draw_source_power(params: NetworkParams, rng: np.random.Generator) -> float:
    """Fading-weighted shot noise of one energy-source field draw."""
    points = sample_field(params.zeta_A, params.R, params.alpha, params.l_A, rng)
    radii = points.active_radii()
    if radii.size == 0:
        return 0.0
    gains = rng.gamma(shape=params.m, scale=params.theta / params.m, size=radii.size)
    return float(params.P_A * np.sum(gains * radii ** (-params.mu)))


def _draw_interference(params: NetworkParams, rng: np.random.Generator) -> float:
    points = sample_field(params.zeta_B, params.R, params.alpha, params.l_B, rng)
    radii = points.active_radii()
    if radii.size == 0:
        return 0.0
    gains = rng.gamma(shape=params.m, scale=params.theta / params.m, size=radii.size)
    return float(params.P_B * np.sum(gains * radii ** (-params.mu)))


def _safe_ratio(numerator: float, denominator: float) -> float:
    if denominator > 0.0:
        return numerator / denominator
    return math.inf if numerator > 0.0 else 0.0


def draw_slot_sample(params: NetworkParams, protocol: str,
                     rng: np.random.Generator,
                     forced_mode: str | None = None) -> SlotSample:
    """Simulate one slot; ``forced_mode`` skips the selection phase entirely."""
    d_mu = params.d ** params.mu

    if forced_mode is None:
        p_select = _draw_source_power(params, rng)
        if protocol == "ptp":
            backscatter = params.omega * params.beta * p_select <= params.rho_H
        elif protocol == "stp":
            gain_trial = rng.exponential(1.0 / params.lam)
            snr_trial = _safe_ratio(
                params.delta * p_select * (1.0 - params.varrho) * gain_trial,
                d_mu * params.sigma2)
            backscatter = (snr_trial > params.tau_B
                           and params.beta * params.varrho * p_select > params.rho_B)
        else:
            raise ValueError(
                f"protocol {protocol!r} has no selection rule; "
                f"pass forced_mode for baselines")
    else:
        if forced_mode not in ("backscatter", "htt"):
            raise ValueError(f"forced_mode must be 'backscatter' or 'htt', got {forced_mode!r}")
        p_select = math.nan
        backscatter = forced_mode == "backscatter"

    p_op = _draw_source_power(params, rng)

    if backscatter:
        powered = params.beta * params.varrho * p_op > params.rho_B
        gain = rng.exponential(1.0 / params.lam)
        snr = (_safe_ratio(params.delta * p_op * (1.0 - params.varrho) * gain,
                           d_mu * params.sigma2)
               if powered else 0.0)
        covered = snr > params.tau_B
        return SlotSample(mode="backscatter", P_I_select=p_select, P_I_op=p_op,
                          Q=0.0, energy_outage=not powered,
                          snr_or_sinr=snr, covered=covered,
                          rate=params.T_B if covered else 0.0)

    powered = params.omega * params.beta * p_op > params.rho_H
    if not powered:
        return SlotSample(mode="htt", P_I_select=p_select, P_I_op=p_op,
                          Q=0.0, energy_outage=True,
                          snr_or_sinr=0.0, covered=False, rate=0.0)
    transmit_power = (params.omega * params.beta * p_op - params.rho_H) / (1.0 - params.omega)
    interference = _draw_interference(params, rng)
    gain = rng.exponential(1.0 / params.lam)
    sinr = _safe_ratio(transmit_power * gain,
                       d_mu * (interference + params.sigma2))
    covered = sinr > params.tau_H
    rate = ((1.0 - params.omega) * params.W * math.log2(1.0 + sinr)
            if covered else 0.0)
    return SlotSample(mode="htt", P_I_select=p_select, P_I_op=p_op,
                      Q=interference, energy_outage=False,
                      snr_or_sinr=sinr, covered=covered, rate=rate)


# =============================================================================
# Aggregation
# =============================================================================

def _trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(trial_index,))))


def _chunk_stats(args) -> tuple[int, np.ndarray, list | None]:
    """Run one chunk of trials; returns (chunk_index, sums, trace rows)."""
    params, protocol, forced_mode, seed, chunk_index, count, trace = args
    sums = np.zeros(6)  # mode, outage, covered, rate, rate^2, trials
    rows: list | None = [] if trace else None
    base = chunk_index * _CHUNK
    for offset in range(count):
        idx = base + offset
        sample = draw_slot_sample(params, protocol, _trial_rng(seed, idx),
                                  forced_mode)
        sums += (sample.mode == "backscatter", sample.energy_outage,
                 sample.covered, sample.rate, sample.rate * sample.rate, 1.0)
        if rows is not None:
            rows.append((idx, sample.mode, sample.P_I_select, sample.P_I_op,
                         sample.snr_or_sinr, int(sample.covered), sample.rate))
    return chunk_index, sums, rows


def _write_trace(path: str, chunks: list[list]) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRACE_COLUMNS)
        for rows in chunks:
            for trial, mode, p_sel, p_op, snr, covered, rate in rows:
                writer.writerow([trial, mode, repr(float(p_sel)),
                                 repr(float(p_op)), repr(float(snr)),
                                 covered, repr(float(rate))])
    os.replace(tmp, path)


def estimate(params: NetworkParams, protocol: str, n_trials: int, seed: int,
             workers: int = 1, trace_path: str | None = None) -> ProtocolMetrics:
    """Monte Carlo metrics with 95% normal-approximation error bars.

    Results are bit-identical for any ``workers`` value: trials are split
    into fixed chunks whose partial sums merge in chunk order.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    forced_mode = _FORCED_MODE.get(protocol)

    n_chunks = (n_trials + _CHUNK - 1) // _CHUNK
    tasks = [(params, protocol, forced_mode, seed, i,
              min(_CHUNK, n_trials - i * _CHUNK), trace_path is not None)
             for i in range(n_chunks)]

    results: list[tuple[np.ndarray, list | None]] = [None] * n_chunks
    if workers > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, sums, rows in pool.map(_chunk_stats, tasks, chunksize=1):
                results[idx] = (sums, rows)
    else:
        for task in tasks:
            idx, sums, rows = _chunk_stats(task)
            results[idx] = (sums, rows)

    totals = np.zeros(6)
    for sums, _ in results:       # fixed merge order: chunk 0, 1, 2, ...
        totals += sums
    if trace_path is not None:
        _write_trace(trace_path, [rows for _, rows in results])

    n = totals[5]
    mode_prob, outage, coverage = totals[0] / n, totals[1] / n, totals[2] / n
    throughput = totals[3] / n

    def proportion_err(p: float) -> float:
        return _Z95 * math.sqrt(max(p * (1.0 - p), 0.0) / n)

    rate_var = max(totals[4] / n - throughput ** 2, 0.0)
    return ProtocolMetrics(
        protocol=protocol, engine="mc",
        B=mode_prob, O=outage, C=coverage, T=throughput,
        B_err=proportion_err(mode_prob), O_err=proportion_err(outage),
        C_err=proportion_err(coverage),
        T_err=_Z95 * math.sqrt(rate_var / n),
        status="ok" if n >= _LOW_CONFIDENCE_N else "low-confidence",
        n_trials=int(n), seed=seed)


def run_baseline(params: NetworkParams, mode: str, n_trials: int, seed: int,
                 **kwargs) -> ProtocolMetrics:
    """Estimate with the mode pinned in every trial (no selection phase)."""
    protocol = {"backscatter": "pure-bs", "htt": "pure-htt"}.get(mode)
    if protocol is None:
        raise ValueError(f"mode must be 'backscatter' or 'htt', got {mode!r}")
    return estimate(params, protocol, n_trials, seed, **kwargs)
