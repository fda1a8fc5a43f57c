"""
Acceptance gate: oracles, dual-engine agreement, shapes, determinism
====================================================================

One test per acceptance criterion. Every test prints a single
"criterion N [PASS|FAIL] ..." line before asserting, so the verdicts
survive in captured output whichever way the gate goes.

Criteria:
  1  closed-form cdf oracle (Poisson field, Rayleigh fading, mu = 4)
  2  Poisson-limit oracle for the Fredholm-determinant functional
  3  sampler mean-count and dispersion-ordering oracle
  4  analytic vs Monte Carlo agreement at six figure-axis points
  5  interferer density leaves energy outage untouched
  6  figure-shape reproduction (five qualitative sub-checks)
  7  CLI preset re-runs are byte-identical, any worker count
"""

import subprocess
import sys
import time

import numpy as np

from ambientd2d import (GammaFadingModifier, POISSON, closed_form_ppp_rayleigh_mu4,
                        coverage_protocol, energy_outage_protocol, estimate,
                        evaluate_protocol, incident_power_distribution,
                        radial_fredholm_det, sample_alpha_gpp,
                        sample_ginibre_disk, sample_ppp_disk)
from ambientd2d.sweeps import PRESETS

# =============================================================================
# Shared tolerances and helpers
# =============================================================================

MC_TRIALS = 100_000
MC_SEED = 1234
FLAT_TOL = 1e-9            # "identical" spread for analytically flat quantities


def _verdict(tag: str, ok: bool, detail: str) -> bool:
    word = "PASS" if ok else "FAIL"
    print(f"criterion {tag} [{word}] {detail}", flush=True)
    return ok


def _three_se(err_95: float) -> float:
    """Three standard errors from a 95% CI half-width."""
    return 3.0 * err_95 / 1.96


# =============================================================================
# 1. Closed-form cdf oracle
# =============================================================================

def test_criterion_1_closed_form_oracle(ppp_wide_params):
    t0 = time.monotonic()
    dist = incident_power_distribution(ppp_wide_params)
    grid = np.geomspace(1e-8, 1e-1, 50)
    got, _ = dist.cdf_batch(grid)
    want = np.array([closed_form_ppp_rayleigh_mu4(ppp_wide_params, rho)[1]
                     for rho in grid])
    worst = float(np.max(np.abs(got - want)))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-3 and elapsed < 60.0
    assert _verdict("1", ok,
                    f"closed-form cdf oracle: worst |dev| {worst:.3e} "
                    f"(tol 1e-3) in {elapsed:.1f} s (limit 60 s)")


# =============================================================================
# 2. Poisson-limit oracle for the determinant functional
# =============================================================================

def test_criterion_2_poisson_limit_oracle(table1_params):
    # Light field: the finite-kappa gap scales with field mass, so a window
    # this size puts kappa = 1024 well inside 1e-3 of the Poisson limit.
    density = 0.002
    radius_m = 12.0
    modifier = GammaFadingModifier(P=table1_params.P_A, theta=table1_params.theta,
                                   m=table1_params.m, mu=table1_params.mu)
    s_grid = np.geomspace(1.0, 1e6, 20)

    t0 = time.monotonic()
    det_kappa = radial_fredholm_det(modifier, -1.0 / 1024.0, density, radius_m, s_grid)
    det_limit = radial_fredholm_det(modifier, POISSON, density, radius_m, s_grid)
    elapsed = time.monotonic() - t0

    rel = np.abs(det_kappa - det_limit) / det_limit
    for s, dk, dp, r in zip(s_grid, det_kappa, det_limit, rel):
        print(f"  s={s:10.3e}  kappa1024={dk:.8f}  poisson={dp:.8f}  rel={r:.3e}")
    worst = float(np.max(rel))
    ok = worst < 1e-3 and elapsed < 60.0
    assert _verdict("2", ok,
                    f"Poisson-limit oracle: worst rel gap {worst:.3e} "
                    f"(tol 1e-3) in {elapsed:.1f} s (limit 60 s)")


# =============================================================================
# 3. Sampler mean-count and dispersion oracle
# =============================================================================

def test_criterion_3_sampler_oracle():
    density = 0.02          # points / m^2
    radius_m = 30.0
    n_draws = 10_000
    target = np.pi * density * radius_m ** 2

    def stream(index):
        return np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=20260817, spawn_key=(index,))))

    rngs = [stream(i) for i in range(3)]
    counts = {}
    counts["ginibre"] = np.array([len(sample_ginibre_disk(density, radius_m, rngs[0]))
                                  for _ in range(n_draws)])
    counts["kappa2"] = np.array([len(sample_alpha_gpp(density, 2, radius_m, rngs[1]))
                                 for _ in range(n_draws)])
    counts["ppp"] = np.array([len(sample_ppp_disk(density, radius_m, rngs[2]))
                              for _ in range(n_draws)])

    mean_ok = True
    fano = {}
    for name, c in counts.items():
        mean = float(np.mean(c))
        se = float(np.std(c, ddof=1)) / np.sqrt(n_draws)
        fano[name] = float(np.var(c, ddof=1)) / mean
        hit = abs(mean - target) <= 3.0 * se
        mean_ok = mean_ok and hit
        print(f"  {name:8s} mean={mean:8.4f} (target {target:.4f}, 3se={3*se:.4f}) "
              f"Fano={fano[name]:.4f}")
    order_ok = fano["ginibre"] < fano["kappa2"] < fano["ppp"]
    ppp_ok = abs(fano["ppp"] - 1.0) <= 0.05
    ok = mean_ok and order_ok and ppp_ok
    assert _verdict("3", ok,
                    f"sampler oracle: means within 3se, Fano "
                    f"{fano['ginibre']:.3f} < {fano['kappa2']:.3f} < "
                    f"{fano['ppp']:.3f} ~ 1")


# =============================================================================
# 4. Dual-engine agreement at six figure-axis points
# =============================================================================

# One point on the swept axis of each preset figure, chosen so every metric
# keeps a healthy Monte Carlo event count at 1e5 trials.
AGREEMENT_POINTS = (
    ("fig3", dict(zeta_A=0.01)),
    ("fig5", dict(zeta_A=0.015)),
    ("fig7", dict(zeta_A=0.02, zeta_B=0.016)),   # interference ratio 0.8
    ("fig9", dict(delta=0.4)),
    ("fig11", dict(d=8.0, zeta_B=0.002)),        # interference ratio 0.1
    ("fig12", dict()),                           # table defaults
)


def test_criterion_4_dual_engine_agreement(table1_params):
    t0 = time.monotonic()
    failures = []
    worst_ratio = 0.0
    for label, overrides in AGREEMENT_POINTS:
        params = table1_params.replace(**overrides)
        dist = incident_power_distribution(params)
        for protocol in ("ptp", "stp"):
            ana = evaluate_protocol(dist, params, protocol)
            mc = estimate(params, protocol, MC_TRIALS, seed=MC_SEED)
            for attr in ("B", "O", "C", "T"):
                diff = abs(getattr(ana, attr) - getattr(mc, attr))
                band = _three_se(getattr(mc, attr + "_err"))
                ratio = diff / band if band > 0.0 else (0.0 if diff == 0.0 else np.inf)
                worst_ratio = max(worst_ratio, ratio)
                if diff > band:
                    failures.append(f"{label}/{protocol}/{attr}: "
                                    f"|{getattr(ana, attr):.4e} - {getattr(mc, attr):.4e}|"
                                    f" > {band:.2e}")
            print(f"  {label:6s} {protocol:4s} B={ana.B:.4f}|{mc.B:.4f} "
                  f"O={ana.O:.3e}|{mc.O:.3e} C={ana.C:.4f}|{mc.C:.4f} "
                  f"T={ana.T:.3e}|{mc.T:.3e}", flush=True)
    elapsed = time.monotonic() - t0
    ok = not failures and elapsed < 1800.0
    assert _verdict("4", ok,
                    f"dual-engine agreement: 48 comparisons, worst |dev|/3se "
                    f"{worst_ratio:.2f}, {len(failures)} outside, "
                    f"{elapsed:.0f} s (limit 1800 s)"
                    + ("; " + "; ".join(failures) if failures else ""))


# =============================================================================
# 5. Interferer density leaves energy outage untouched
# =============================================================================

def test_criterion_5_interferer_density_free_outage(table1_params):
    zetas_b = (0.0, table1_params.zeta_A, 4.0 * table1_params.zeta_A)

    spreads = []
    for protocol in ("ptp", "stp"):
        vals = []
        for zb in zetas_b:
            params = table1_params.replace(zeta_B=zb)
            dist = incident_power_distribution(params)
            vals.append(energy_outage_protocol(dist, params, protocol))
        spreads.append(max(vals) - min(vals))
    analytic_ok = max(spreads) <= FLAT_TOL

    mc_ok = True
    for protocol in ("ptp", "stp"):
        runs = [estimate(table1_params.replace(zeta_B=zb), protocol, 20_000, seed=777)
                for zb in zetas_b]
        for i in range(len(runs)):
            for j in range(i + 1, len(runs)):
                se_i = runs[i].O_err / 1.96
                se_j = runs[j].O_err / 1.96
                gap = abs(runs[i].O - runs[j].O)
                mc_ok = mc_ok and gap <= 3.0 * np.hypot(se_i, se_j) + FLAT_TOL
    ok = analytic_ok and mc_ok
    assert _verdict("5", ok,
                    f"outage free of interferer density: analytic spread "
                    f"{max(spreads):.2e} (tol 1e-9), MC pairwise within 3 sigma")


# =============================================================================
# 6. Figure-shape reproduction
# =============================================================================

def test_criterion_6a_stp_outage_monotone(table1_params):
    grid = PRESETS["fig4"].grid
    vals = []
    for z in grid:
        params = table1_params.replace(zeta_A=float(z))
        dist = incident_power_distribution(params)
        vals.append(energy_outage_protocol(dist, params, "stp"))
    worst_rise = float(np.max(np.diff(vals)))
    ok = worst_rise <= FLAT_TOL
    assert _verdict("6a", ok,
                    f"snr-threshold outage nonincreasing over {len(grid)} "
                    f"densities: worst rise {worst_rise:.2e}")


def test_criterion_6b_ptp_outage_dip_then_rise(table1_params):
    # Steeper path loss shifts the mode handoff into the visible density
    # range: outage falls while backscatter dominates, turns at the handoff,
    # then climbs while the harvesting mode takes over (before the final
    # decay once harvested power saturates both thresholds).
    grid = np.linspace(0.001, 0.012, 23)
    vals = []
    for z in grid:
        params = table1_params.replace(zeta_A=float(z), mu=3.0)
        dist = incident_power_distribution(params)
        vals.append(energy_outage_protocol(dist, params, "ptp"))
    vals = np.array(vals)

    dip = None
    for k in range(1, len(vals) - 1):
        if vals[k] < vals[k - 1] and vals[k] < vals[k + 1]:
            dip = k
            break
    if dip is None:
        assert _verdict("6b", False, "ptp outage dip: no interior local minimum")
    falls = bool(np.all(np.diff(vals[:dip + 1]) < 0.0))
    rises = vals[dip + 1] > vals[dip] and vals[dip + 2] > vals[dip + 1]
    inside = 0.002 - 1e-12 <= grid[dip] <= 0.01 + 1e-12
    ok = falls and rises and inside
    assert _verdict("6b", ok,
                    f"ptp outage dip-then-rise (mu=3): minimum at density "
                    f"{grid[dip]:.4f} in [0.002, 0.01], "
                    f"neighbors {vals[dip-1]:.4f} > {vals[dip]:.4f} < {vals[dip+1]:.4f}")


def test_criterion_6c_repulsion_improves_coverage(table1_params):
    grid = PRESETS["fig5"].grid
    worst_gap = -np.inf
    ok = True
    for z in grid:
        cov = {}
        for alpha in (-1.0, POISSON):
            params = table1_params.replace(zeta_A=float(z), alpha=alpha)
            dist = incident_power_distribution(params)
            cov[alpha] = {proto: coverage_protocol(dist, params, proto)
                          for proto in ("ptp", "stp")}
        for proto in ("ptp", "stp"):
            gap = cov[POISSON][proto] - cov[-1.0][proto]
            worst_gap = max(worst_gap, gap)
            ok = ok and gap <= FLAT_TOL
    assert _verdict("6c", ok,
                    f"repulsive field covers at least as well as Poisson at "
                    f"{len(grid)} densities x 2 protocols: worst shortfall "
                    f"{max(worst_gap, 0.0):.2e}")


def test_criterion_6d_pure_htt_flat_in_backscatter_efficiency(table1_params):
    grid = PRESETS["fig9"].grid
    vals = []
    for delta in grid:
        params = table1_params.replace(delta=float(delta))
        dist = incident_power_distribution(params)
        vals.append(coverage_protocol(dist, params, "pure-htt"))
    spread = max(vals) - min(vals)
    ok = spread <= FLAT_TOL
    assert _verdict("6d", ok,
                    f"pure-htt coverage flat across {len(grid)} backscatter "
                    f"efficiencies: spread {spread:.2e}")


def test_criterion_6e_stp_covers_better_under_heavy_interference(table1_params):
    margins = []
    for z in (0.06, 0.07, 0.08):
        params = table1_params.replace(zeta_A=z, zeta_B=0.8 * z)
        dist = incident_power_distribution(params)
        margins.append(coverage_protocol(dist, params, "stp")
                       - coverage_protocol(dist, params, "ptp"))
    ok = all(m >= 0.0 for m in margins)
    assert _verdict("6e", ok,
                    "stp >= ptp coverage at interference ratio 0.8: margins "
                    + ", ".join(f"{m:+.4f}" for m in margins))


# =============================================================================
# 7. CLI determinism across re-runs and worker counts
# =============================================================================

def test_criterion_7_cli_determinism(tmp_path):
    def run(out_dir, workers):
        cmd = [sys.executable, "-m", "ambientd2d.cli", "--figure", "fig3",
               "--trials", "1100", "--seed", "4242", "--engine", "both",
               "--workers", str(workers), "--out", str(out_dir)]
        return subprocess.run(cmd, capture_output=True, text=True, timeout=420)

    dirs = [tmp_path / name for name in ("first", "rerun", "three_workers")]
    results = [run(dirs[0], 1), run(dirs[1], 1), run(dirs[2], 3)]
    codes = [r.returncode for r in results]

    names = sorted(p.name for p in dirs[0].glob("*.csv"))
    same_sets = all(sorted(p.name for p in d.glob("*.csv")) == names for d in dirs)
    identical = bool(names) and same_sets
    if identical:
        for name in names:
            blobs = [(d / name).read_bytes() for d in dirs]
            identical = identical and blobs[0] == blobs[1] == blobs[2]
    ok = codes == [0, 0, 0] and identical
    assert _verdict("7", ok,
                    f"CLI determinism: exit codes {codes}, {len(names)} csv "
                    f"files byte-identical across re-run and workers 1/3")
