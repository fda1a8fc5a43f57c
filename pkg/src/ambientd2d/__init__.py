"""
ambientd2d: performance laboratory for ambient-RF-powered D2D links
===================================================================

Dual-engine evaluation of a hybrid backscatter / harvest-then-transmit
device-to-device link drawing energy from a repulsive (alpha-Ginibre) or
Poisson field of ambient RF sources. The analytic engine computes mode
selection, energy outage, coverage, and throughput from the radial Fredholm
determinant of the field's Laplace functional plus numerical transform
inversion; the Monte Carlo engine re-derives the same metrics from explicit
slot simulations for cross-checking.
"""

from .params import (POISSON, ConfigError, NetworkParams, normalize_config,
                     parse_config_text, read_config, table1_config, validate)
from .pointfield import (PointSet, dump_points_csv, sample_alpha_gpp,
                         sample_field, sample_ginibre_disk, sample_ppp_disk,
                         thin_by_load)
from .inversion import (EULER_SHIFT, InversionResult, NumericsError,
                        euler_nodes, invert_laplace, talbot_nodes)
from .functionals import (GammaFadingModifier, PointFunctionModifier,
                          log_panels, radial_fredholm_det)
from .incident import (IncidentPowerDistribution, closed_form_ppp_rayleigh_mu4,
                       incident_power_distribution, laplace_incident_power)
from .metrics import (PROTOCOLS, ProtocolMetrics, coverage_backscatter,
                      coverage_htt, coverage_protocol, energy_outage_mode,
                      energy_outage_protocol, evaluate_protocol,
                      prob_backscatter_ptp, prob_backscatter_stp,
                      throughput_htt, throughput_protocol)
from .montecarlo import SlotSample, draw_slot_sample, estimate, run_baseline
from .sweeps import (PRESETS, FigurePreset, SweepSpec, emit_figure_dataset,
                     run_experiment, write_rows_csv)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # configuration
    "POISSON", "ConfigError", "NetworkParams", "normalize_config",
    "parse_config_text", "read_config", "table1_config", "validate",
    # point fields
    "PointSet", "dump_points_csv", "sample_alpha_gpp", "sample_field",
    "sample_ginibre_disk", "sample_ppp_disk", "thin_by_load",
    # transforms
    "EULER_SHIFT", "InversionResult", "NumericsError", "euler_nodes",
    "invert_laplace", "talbot_nodes",
    "GammaFadingModifier", "PointFunctionModifier", "log_panels",
    "radial_fredholm_det",
    # incident power distribution
    "IncidentPowerDistribution", "closed_form_ppp_rayleigh_mu4",
    "incident_power_distribution", "laplace_incident_power",
    # metrics
    "PROTOCOLS", "ProtocolMetrics", "coverage_backscatter", "coverage_htt",
    "coverage_protocol", "energy_outage_mode", "energy_outage_protocol",
    "evaluate_protocol", "prob_backscatter_ptp", "prob_backscatter_stp",
    "throughput_htt", "throughput_protocol",
    # Monte Carlo
    "SlotSample", "draw_slot_sample", "estimate", "run_baseline",
    # sweeps
    "PRESETS", "FigurePreset", "SweepSpec", "emit_figure_dataset",
    "run_experiment", "write_rows_csv",
]
