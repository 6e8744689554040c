"""System parameters: raw configuration, validation, and derived quantities.

The raw configuration mirrors what an experiment note would list (mode
frequencies, linewidths, couplings, laser power/wavelength, temperature, drive).
`derive_params` turns it into the closed set of angular-frequency quantities the
solvers consume: the laser drive amplitude E, thermal occupations, and the
mechanical quality factor.

Frequencies in a config file may be given in Hz or rad/s; the `units` field
decides, and everything is angular internally.
"""
from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass
from typing import Any

from .constants import (
    C_LIGHT,
    GYROMAGNETIC_YIG,
    HBAR,
    K_BOLTZMANN,
    TWO_PI,
    hz_to_angular,
)

VALID_UNITS = ("Hz", "rad_s")
DRIVE_MODES = ("population", "rabi", "field")


class ValidationError(ValueError):
    """Raised for ill-formed configuration input; names the offending field."""


@dataclass(frozen=True)
class DriveSpec:
    """How the magnon mode is driven.

    Exactly one of the three parameterizations is active:
      population  -- target steady magnon number N_m; the Rabi rate is back-solved
      rabi        -- Rabi rate Omega directly (rad/s)
      field       -- microwave drive field amplitude B0 (tesla) acting on N_spins
    """

    mode: str
    N_m: float | None = None
    Omega: float | None = None
    B0: float | None = None
    N_spins: float | None = None


@dataclass(frozen=True)
class RawConfig:
    """Validated raw inputs. Frequencies are in rad/s after parsing."""

    omega_m: float          # magnon (Kittel) mode frequency
    omega_b: float          # mechanical mode frequency
    omega_c: float          # optical cavity frequency
    kappa_m: float          # magnon linewidth (FWHM convention of the model)
    kappa_c: float          # cavity linewidth
    gamma_b: float          # mechanical damping rate
    g_mb: float             # magnon-phonon dispersive coupling (per magnon)
    g_cb: float             # photon-phonon dispersive coupling (per photon)
    delta_m_eff: float      # magnon detuning: effective target (population mode) or bare (rabi/field)
    laser_power: float      # W
    laser_wavelength: float # m
    temperature: float      # K
    drive: DriveSpec
    squeeze_db: float = 0.0 # phase-quadrature input squeezing of the cavity, dB >= 0


@dataclass(frozen=True)
class SystemParams:
    """Full parameter set consumed by the solvers. All rates/frequencies rad/s.

    Derived fields (E, n_m, n_b, Q_mech) are consistent with the raw ones by
    construction; use `derive_params` / `rederive` rather than building by hand.
    """

    omega_m: float
    omega_b: float
    omega_c: float
    kappa_m: float
    kappa_c: float
    gamma_b: float
    g_mb: float
    g_cb: float
    delta_m_eff: float
    delta_c: float            # bare cavity detuning; the laser is locked on resonance
    laser_power: float
    laser_wavelength: float
    temperature: float
    drive: DriveSpec
    squeeze_db: float
    E: float                  # laser drive amplitude, rad/s
    Omega: float | None       # magnon Rabi rate if fixed by the drive (rabi/field), else None
    n_m: float                # thermal magnon occupation
    n_b: float                # thermal phonon occupation
    Q_mech: float             # omega_b / gamma_b

    def updated(self, **changes: Any) -> "SystemParams":
        """Copy with raw fields replaced and derived fields recomputed."""
        raw_fields = {
            "omega_m", "omega_b", "omega_c", "kappa_m", "kappa_c", "gamma_b",
            "g_mb", "g_cb", "delta_m_eff", "laser_power", "laser_wavelength",
            "temperature", "drive", "squeeze_db",
        }
        bad = set(changes) - raw_fields
        if bad:
            raise ValidationError(f"cannot update derived or unknown fields: {sorted(bad)}")
        raw = RawConfig(
            **{f: changes.get(f, getattr(self, f)) for f in sorted(raw_fields)}
        )
        return derive_params(raw)


def thermal_occupation(omega: float, temperature: float) -> float:
    """Mean thermal occupation of a bosonic mode, 1/(exp(hbar*w/kT) - 1).

    Returns exactly 0 at T = 0. Guarded against overflow deep in the quantum
    regime, where the occupation underflows smoothly to 0.
    """
    if omega <= 0.0:
        raise ValidationError(f"mode frequency must be positive, got {omega}")
    if temperature < 0.0:
        raise ValidationError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (K_BOLTZMANN * temperature)
    if x > 700.0:
        # 1/(e^x - 1) ~= e^-x to double precision here
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def drive_amplitude(kappa_c: float, laser_power: float, laser_wavelength: float) -> float:
    """Laser drive amplitude E = sqrt(kappa_c * P / (hbar * omega_L))."""
    omega_L = TWO_PI * C_LIGHT / laser_wavelength
    return math.sqrt(kappa_c * laser_power / (HBAR * omega_L))


def rabi_from_field(B0: float, n_spins: float) -> float:
    """Collective Rabi rate of the uniform magnon mode driven by a field B0.

    Omega = (sqrt(5)/4) * gamma * sqrt(N) * B0, with the YIG gyromagnetic ratio.
    """
    if B0 < 0.0:
        raise ValidationError(f"drive field amplitude must be >= 0, got {B0}")
    if n_spins <= 0.0:
        raise ValidationError(f"spin count must be positive, got {n_spins}")
    return (math.sqrt(5.0) / 4.0) * GYROMAGNETIC_YIG * math.sqrt(n_spins) * B0


def _require_positive(name: str, value: float) -> None:
    if not (value > 0.0) or not math.isfinite(value):
        raise ValidationError(f"{name} must be positive and finite, got {value}")


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value}")


def validate_raw(raw: RawConfig) -> None:
    """Reject non-physical configurations; error messages name the field."""
    for name in ("omega_m", "omega_b", "omega_c", "kappa_m", "kappa_c", "gamma_b"):
        _require_positive(name, getattr(raw, name))
    for name in ("g_mb", "g_cb", "laser_power"):
        v = getattr(raw, name)
        _require_finite(name, v)
        if v < 0.0:
            raise ValidationError(f"{name} must be >= 0, got {v}")
    _require_positive("laser_wavelength", raw.laser_wavelength)
    _require_finite("delta_m_eff", raw.delta_m_eff)
    if raw.temperature < 0.0 or not math.isfinite(raw.temperature):
        raise ValidationError(f"temperature must be >= 0 and finite, got {raw.temperature}")
    if raw.squeeze_db < 0.0 or not math.isfinite(raw.squeeze_db):
        raise ValidationError(f"squeeze_db must be >= 0 and finite, got {raw.squeeze_db}")

    d = raw.drive
    if d.mode not in DRIVE_MODES:
        raise ValidationError(f"drive mode must be one of {DRIVE_MODES}, got {d.mode!r}")
    if d.mode == "population":
        if d.N_m is None or d.N_m < 0.0 or not math.isfinite(d.N_m):
            raise ValidationError(f"population drive requires N_m >= 0, got {d.N_m}")
    elif d.mode == "rabi":
        if d.Omega is None or d.Omega < 0.0 or not math.isfinite(d.Omega):
            raise ValidationError(f"rabi drive requires Omega >= 0, got {d.Omega}")
    else:
        if d.B0 is None or d.N_spins is None:
            raise ValidationError("field drive requires both B0 and N_spins")
        if d.B0 < 0.0:
            raise ValidationError(f"B0 must be >= 0, got {d.B0}")
        if d.N_spins <= 0.0:
            raise ValidationError(f"N_spins must be positive, got {d.N_spins}")


def derive_params(raw: RawConfig) -> SystemParams:
    """Validate and derive the closed parameter set.

    The laser is locked on the bare cavity resonance (delta_c = 0); any residual
    effective detuning comes from the mechanical displacement alone. In rabi and
    field modes the Rabi rate is fixed here; in population mode it is back-solved
    by the steady-state solver from the target N_m and the held detuning.
    """
    validate_raw(raw)
    E = drive_amplitude(raw.kappa_c, raw.laser_power, raw.laser_wavelength)
    if raw.drive.mode == "rabi":
        omega_rabi: float | None = raw.drive.Omega
    elif raw.drive.mode == "field":
        omega_rabi = rabi_from_field(raw.drive.B0, raw.drive.N_spins)
    else:
        omega_rabi = None
    q_mech = raw.omega_b / raw.gamma_b
    if q_mech < 1e3:
        warnings.warn(
            f"mechanical quality factor {q_mech:.3g} < 1e3; the delta-correlated "
            "Brownian noise model is marginal at this damping",
            stacklevel=2,
        )
    return SystemParams(
        omega_m=raw.omega_m,
        omega_b=raw.omega_b,
        omega_c=raw.omega_c,
        kappa_m=raw.kappa_m,
        kappa_c=raw.kappa_c,
        gamma_b=raw.gamma_b,
        g_mb=raw.g_mb,
        g_cb=raw.g_cb,
        delta_m_eff=raw.delta_m_eff,
        delta_c=0.0,
        laser_power=raw.laser_power,
        laser_wavelength=raw.laser_wavelength,
        temperature=raw.temperature,
        drive=raw.drive,
        squeeze_db=raw.squeeze_db,
        E=E,
        Omega=omega_rabi,
        n_m=thermal_occupation(raw.omega_m, raw.temperature),
        n_b=thermal_occupation(raw.omega_b, raw.temperature),
        Q_mech=q_mech,
    )


# --- configuration files ----------------------------------------------------

_FREQUENCY_KEYS = (
    "omega_m", "omega_b", "omega_c", "kappa_m", "kappa_c", "gamma_b",
    "g_mb", "g_cb", "delta_m_eff",
)
_SCALAR_KEYS = ("laser_power", "laser_wavelength", "temperature", "squeeze_db")
_KNOWN_KEYS = set(_FREQUENCY_KEYS) | set(_SCALAR_KEYS) | {"units", "drive_mode"}


def parse_config(data: dict[str, Any]) -> RawConfig:
    """Build a RawConfig from a decoded JSON mapping.

    Unknown keys are a hard error (typos must not silently change physics).
    `drive_mode` is a single-entry mapping: {"population": N} | {"rabi": Omega} |
    {"field": {"B0": ..., "N_spins": ...}}. Under units="Hz", all frequency-like
    values (including a rabi Omega) are converted with one factor of 2*pi.
    """
    if not isinstance(data, dict):
        raise ValidationError("config root must be a JSON object")
    unknown = sorted(set(data) - _KNOWN_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {unknown}")

    units = data.get("units", "Hz")
    if units not in VALID_UNITS:
        raise ValidationError(f"units must be one of {VALID_UNITS}, got {units!r}")
    scale = (lambda v: hz_to_angular(float(v))) if units == "Hz" else float

    missing = [k for k in (*_FREQUENCY_KEYS, "laser_power", "laser_wavelength",
                           "temperature", "drive_mode") if k not in data]
    if missing:
        raise ValidationError(f"missing config keys: {missing}")

    def _num(key: str, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{key} must be a number, got {value!r}")
        return float(value)

    freq = {k: scale(_num(k, data[k])) for k in _FREQUENCY_KEYS}

    dm = data["drive_mode"]
    if not isinstance(dm, dict) or len(dm) != 1:
        raise ValidationError(
            "drive_mode must be a single-entry object, e.g. {\"population\": 1e10}"
        )
    (mode, payload), = dm.items()
    if mode not in DRIVE_MODES:
        raise ValidationError(f"drive mode must be one of {DRIVE_MODES}, got {mode!r}")
    if mode == "population":
        drive = DriveSpec(mode="population", N_m=_num("drive_mode.population", payload))
    elif mode == "rabi":
        drive = DriveSpec(mode="rabi", Omega=scale(_num("drive_mode.rabi", payload)))
    else:
        if not isinstance(payload, dict) or set(payload) != {"B0", "N_spins"}:
            raise ValidationError('field drive must be {"B0": ..., "N_spins": ...}')
        drive = DriveSpec(mode="field",
                          B0=_num("drive_mode.field.B0", payload["B0"]),
                          N_spins=_num("drive_mode.field.N_spins", payload["N_spins"]))

    return RawConfig(
        **freq,
        laser_power=_num("laser_power", data["laser_power"]),
        laser_wavelength=_num("laser_wavelength", data["laser_wavelength"]),
        temperature=_num("temperature", data["temperature"]),
        drive=drive,
        squeeze_db=_num("squeeze_db", data.get("squeeze_db", 0.0)),
    )


def load_config(path: str) -> RawConfig:
    """Read and parse a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def params_snapshot(p: SystemParams) -> dict[str, Any]:
    """JSON-serializable snapshot of a fully derived parameter set (rad/s units)."""
    d = dataclasses.asdict(p)
    d["drive"] = {k: v for k, v in d["drive"].items() if v is not None}
    return d
