"""
Model parameters, unit conversion, and validation
=================================================

Every quantity the link model needs lives in :class:`NetworkParams`, stored in
SI linear units. Raw configuration records use a flat key=value scheme with
unit-suffixed keys (``_w``, ``_m``, ``_hz``, ``_db``, ``_dbm_per_hz``); fields
that are naturally dimensionless keep bare keys. ``normalize_config`` converts
a complete raw record into a validated parameter set and is idempotent on
SI-unit input.

Two fields need care:

* ``alpha`` is the repulsion factor of the ambient-transmitter field. It is
  either ``-1/kappa`` for a positive integer ``kappa`` (``-1`` is the fully
  repulsive Ginibre case) or the string sentinel ``"poisson"`` for the
  no-repulsion limit.
* ``sigma2`` is total noise power in W. Config records may supply it directly
  (``sigma2_w``) or as a power spectral density (``sigma2_dbm_per_hz``), in
  which case it is multiplied by the operating bandwidth ``W_hz``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from typing import Any, Mapping

__all__ = [
    "ConfigError",
    "NetworkParams",
    "normalize_config",
    "validate",
    "table1_config",
    "read_config",
    "parse_config_text",
]

POISSON = "poisson"


class ConfigError(ValueError):
    """Raised on malformed or out-of-range configuration input.

    ``violations`` carries one message per problem so callers see the full
    report at once instead of fixing errors one at a time.
    """

    def __init__(self, violations: list[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = violations
        super().__init__("; ".join(violations))


# =============================================================================
# Parameter record
# =============================================================================

@dataclass(frozen=True)
class NetworkParams:
    """All scalar model parameters in SI linear units."""

    zeta_A: float          # energy-source field density (points / m^2)
    zeta_B: float          # interferer field density (points / m^2)
    l_A: float             # transmission load of the energy-source field, in [0, 1]
    l_B: float             # transmission load of the interferer field, in [0, 1]
    alpha: float | str     # repulsion factor (-1/kappa) or "poisson"
    P_A: float             # energy-source transmit power (W)
    P_B: float             # interferer transmit power (W)
    mu: float              # path-loss exponent, > 2
    R: float               # observation window radius (m)
    d: float               # transmitter-receiver distance (m)
    sigma2: float          # total noise power (W)
    W: float               # active-transmission bandwidth (Hz)
    omega: float           # harvesting time fraction in (0, 1)
    beta: float            # RF-to-DC conversion efficiency in (0, 1]
    varrho: float          # fraction of incident power rectified while backscattering
    delta: float           # backscattering efficiency in (0, 1]
    lam: float             # rate of the exponential D2D link gains (config key "lambda")
    theta: float           # mean of the ambient fading gains
    m: int                 # Nakagami shape (positive integer)
    tau_B: float           # backscatter decode threshold (linear)
    tau_H: float           # active-mode decode threshold (linear)
    rho_B: float           # backscatter circuit power (W)
    rho_H: float           # active-mode circuit power (W)
    T_B: float             # backscatter data rate (bit/s)
    strict_appendix: bool = False  # reproduce the literal printed integrands

    @property
    def is_poisson(self) -> bool:
        return isinstance(self.alpha, str)

    @property
    def kappa(self) -> int | None:
        """Number of independent unit-repulsion copies; None in the Poisson limit."""
        if self.is_poisson:
            return None
        return int(round(-1.0 / self.alpha))

    @property
    def xi(self) -> float:
        """Active-density ratio of interferers to energy sources."""
        if self.l_A * self.zeta_A == 0.0:
            return math.nan
        return (self.l_B * self.zeta_B) / (self.l_A * self.zeta_A)

    def replace(self, **changes: Any) -> "NetworkParams":
        return validate(dataclasses.replace(self, **changes))

    def to_config(self, db_units: bool = False) -> dict[str, Any]:
        """Export as a raw config record.

        With ``db_units=False`` the record is in SI linear units and feeding it
        back through ``normalize_config`` reproduces this object exactly. With
        ``db_units=True`` the noise and thresholds are expressed in dBm/Hz and
        dB, round-tripping to within floating-point accuracy.
        """
        rec: dict[str, Any] = {
            "zeta_A": self.zeta_A, "zeta_B": self.zeta_B,
            "l_A": self.l_A, "l_B": self.l_B,
            "alpha": self.alpha,
            "P_A_w": self.P_A, "P_B_w": self.P_B,
            "mu": self.mu, "R_m": self.R, "d_m": self.d,
            "W_hz": self.W,
            "omega": self.omega, "beta": self.beta, "varrho": self.varrho,
            "delta": self.delta, "lambda": self.lam, "theta": self.theta,
            "m": self.m,
            "rho_B_w": self.rho_B, "rho_H_w": self.rho_H,
            "T_B": self.T_B,
        }
        if db_units:
            rec["sigma2_dbm_per_hz"] = 10.0 * math.log10(self.sigma2 / self.W) + 30.0
            rec["tau_B_db"] = 10.0 * math.log10(self.tau_B)
            rec["tau_H_db"] = 10.0 * math.log10(self.tau_H)
        else:
            rec["sigma2_w"] = self.sigma2
            rec["tau_B"] = self.tau_B
            rec["tau_H"] = self.tau_H
        return rec

    def params_hash(self) -> str:
        """Short stable hash of the resolved parameter set (row provenance)."""
        items = sorted(self.to_config().items()) + [("strict_appendix", self.strict_appendix)]
        blob = repr(items).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


# =============================================================================
# Raw-record schema
# =============================================================================

# Canonical config key -> field name for single-form keys.
_PLAIN_KEYS = {
    "zeta_A": "zeta_A", "zeta_B": "zeta_B",
    "l_A": "l_A", "l_B": "l_B",
    "alpha": "alpha", "mu": "mu",
    "omega": "omega", "beta": "beta", "varrho": "varrho", "delta": "delta",
    "lambda": "lam", "theta": "theta", "m": "m",
    "P_A_w": "P_A", "P_B_w": "P_B",
    "R_m": "R", "d_m": "d", "W_hz": "W",
    "rho_B_w": "rho_B", "rho_H_w": "rho_H",
    "T_B": "T_B",
}

# Fields accepted in exactly one of two unit forms.
_DUAL_KEYS = {
    "sigma2": ("sigma2_w", "sigma2_dbm_per_hz"),
    "tau_B": ("tau_B", "tau_B_db"),
    "tau_H": ("tau_H", "tau_H_db"),
}

_OPTIONAL_KEYS = {"xi"}  # consistency-checked, never stored

_ALL_KEYS = (
    set(_PLAIN_KEYS)
    | {k for pair in _DUAL_KEYS.values() for k in pair}
    | _OPTIONAL_KEYS
)

# Section-V base setting. Densities and the repulsion factor are the quantities
# the experiment sweeps vary most often.
_TABLE1 = {
    "zeta_A": 0.02, "zeta_B": 0.004,
    "l_A": 1.0, "l_B": 1.0,
    "alpha": -1.0,
    "P_A_w": 0.2, "P_B_w": 0.2,
    "mu": 4.0, "R_m": 30.0, "d_m": 5.0,
    "sigma2_dbm_per_hz": -120.0,
    "W_hz": 1.0e6,
    "omega": 0.5, "beta": 0.3, "varrho": 0.625, "delta": 1.0,
    "lambda": 1.0, "theta": 1.0, "m": 1,
    "tau_B_db": 5.0, "tau_H_db": -40.0,
    "rho_B_w": 8.9e-6, "rho_H_w": 113.0e-6,
    "T_B": 1.0e3,
}


def table1_config() -> dict[str, Any]:
    """Fresh copy of the built-in base configuration (raw record, mixed units)."""
    return dict(_TABLE1)


# =============================================================================
# Parsing and normalization
# =============================================================================

def parse_config_text(text: str) -> dict[str, Any]:
    """Parse flat ``key = value`` text. Unknown keys are an error."""
    record: dict[str, Any] = {}
    problems: list[str] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in record:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        if key == "alpha" and value == POISSON:
            record[key] = POISSON
            continue
        try:
            record[key] = float(value)
        except ValueError:
            problems.append(f"line {lineno}: key {key!r} has non-numeric value {value!r}")
    if problems:
        raise ConfigError(problems)
    return record


def read_config(path: str) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _coerce_alpha(value: Any, problems: list[str]) -> float | str:
    if isinstance(value, str):
        if value == POISSON:
            return POISSON
        problems.append(f"alpha: string value must be {POISSON!r}, got {value!r}")
        return POISSON
    return float(value)


def normalize_config(raw: Mapping[str, Any]) -> NetworkParams:
    """Convert a complete raw record to validated SI-unit parameters.

    The record must supply every required key (use ``table1_config()`` as the
    base and overlay changes). Unknown keys, missing keys, out-of-range values,
    and both members of a dual-unit pair are all reported together.
    """
    problems: list[str] = []

    unknown = set(raw) - _ALL_KEYS
    for key in sorted(unknown):
        problems.append(f"unknown key {key!r}")

    fields: dict[str, Any] = {}
    for key, field in _PLAIN_KEYS.items():
        if key not in raw:
            problems.append(f"missing key {key!r}")
        elif field == "alpha":
            fields["alpha"] = _coerce_alpha(raw[key], problems)
        else:
            fields[field] = float(raw[key])

    for field, (linear_key, db_key) in _DUAL_KEYS.items():
        have_linear, have_db = linear_key in raw, db_key in raw
        if have_linear and have_db:
            problems.append(f"both {linear_key!r} and {db_key!r} supplied; pick one")
        elif not have_linear and not have_db:
            problems.append(f"missing key {linear_key!r} (or {db_key!r})")
        elif field == "sigma2":
            if have_linear:
                fields["sigma2"] = float(raw[linear_key])
            elif "W_hz" not in raw:
                problems.append(f"{db_key!r} given but W_hz missing (needed to integrate the PSD)")
            else:
                # PSD in dBm/Hz: convert to W/Hz, then integrate over the bandwidth.
                fields["sigma2"] = 10.0 ** ((float(raw[db_key]) - 30.0) / 10.0) * float(raw["W_hz"])
        else:
            if have_linear:
                fields[field] = float(raw[linear_key])
            else:
                fields[field] = 10.0 ** (float(raw[db_key]) / 10.0)

    if "m" in fields:
        m_val = fields["m"]
        if abs(m_val - round(m_val)) > 1e-9:
            problems.append(f"m: Nakagami shape must be a positive integer, got {m_val}")
        fields["m"] = int(round(m_val))

    if problems:
        raise ConfigError(problems)

    params = NetworkParams(**fields)
    params = validate(params)

    if "xi" in raw and params.l_A * params.zeta_A > 0.0:
        declared = float(raw["xi"])
        if not math.isclose(declared, params.xi, rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigError(
                f"xi={declared} inconsistent with l_B*zeta_B/(l_A*zeta_A)={params.xi!r}"
            )
    return params


def validate(params: NetworkParams) -> NetworkParams:
    """Certify every invariant; raises with the full violation list."""
    v: list[str] = []

    def check(ok: bool, msg: str) -> None:
        if not ok:
            v.append(msg)

    check(params.zeta_A >= 0.0, f"zeta_A: density nonnegative, got {params.zeta_A}")
    check(params.zeta_B >= 0.0, f"zeta_B: density nonnegative, got {params.zeta_B}")
    check(0.0 <= params.l_A <= 1.0, f"l_A: load in [0, 1], got {params.l_A}")
    check(0.0 <= params.l_B <= 1.0, f"l_B: load in [0, 1], got {params.l_B}")
    check(params.P_A >= 0.0, f"P_A: power nonnegative, got {params.P_A}")
    check(params.P_B >= 0.0, f"P_B: power nonnegative, got {params.P_B}")
    check(params.sigma2 >= 0.0, f"sigma2: power nonnegative, got {params.sigma2}")
    check(params.W >= 0.0, f"W: bandwidth nonnegative, got {params.W}")
    check(params.mu > 2.0, f"mu: path-loss exponent must exceed 2, got {params.mu}")
    check(params.R >= 0.0, f"R: distance nonnegative, got {params.R}")
    check(params.d >= 0.0, f"d: distance nonnegative, got {params.d}")
    check(0.0 < params.omega < 1.0, f"omega: strictly inside (0, 1), got {params.omega}")
    check(0.0 < params.beta <= 1.0, f"beta: in (0, 1], got {params.beta}")
    check(0.0 < params.varrho < 1.0, f"varrho: strictly inside (0, 1), got {params.varrho}")
    check(0.0 < params.delta <= 1.0, f"delta: in (0, 1], got {params.delta}")
    check(params.lam > 0.0, f"lambda: rate positive, got {params.lam}")
    check(params.theta > 0.0, f"theta: mean gain positive, got {params.theta}")
    check(isinstance(params.m, int) and params.m >= 1,
          f"m: positive integer Nakagami shape, got {params.m!r}")
    check(params.tau_B > 0.0, f"tau_B: threshold positive, got {params.tau_B}")
    check(params.tau_H > 0.0, f"tau_H: threshold positive, got {params.tau_H}")
    check(params.rho_B >= 0.0, f"rho_B: power nonnegative, got {params.rho_B}")
    check(params.rho_H >= 0.0, f"rho_H: power nonnegative, got {params.rho_H}")
    check(params.rho_B < params.rho_H,
          f"rho_B < rho_H required (backscatter circuitry draws less), "
          f"got {params.rho_B} >= {params.rho_H}")
    check(params.T_B >= 0.0, f"T_B: rate nonnegative, got {params.T_B}")

    if not params.is_poisson:
        a = params.alpha
        if not (-1.0 <= a < 0.0):
            v.append(f"alpha: must lie in [-1, 0) or be '{POISSON}', got {a}")
        else:
            kappa = -1.0 / a
            if abs(kappa - round(kappa)) > 1e-9 or round(kappa) < 1:
                v.append(f"alpha: -1/alpha must be a positive integer, got alpha={a}")

    if v:
        raise ConfigError(v)
    return params
