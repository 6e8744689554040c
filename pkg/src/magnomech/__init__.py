"""Optical phase readout of magnon number in a cavity magnomechanical system.

A magnon mode dispersively pushes a mechanical oscillator; a detuned optical
cavity reads the resulting static displacement on its phase quadrature. The
package solves the classical operating point, linearizes the quantum
fluctuations around it, and turns both into sensing figures of merit:
measurement window, noise floor, smallest resolvable population, and the gain
from injecting phase-squeezed light.
"""
from .constants import GYROMAGNETIC_YIG, HBAR, K_BOLTZMANN, angular_to_hz, hz_to_angular
from .fluctuations import (
    FluctuationError,
    LinearizedSystem,
    QuadratureError,
    StabilityReport,
    UnstableSystemError,
    VarianceResult,
    build_linearized,
    char_poly,
    nsd_explicit,
    nsd_resolvent,
    routh_hurwitz,
    stability,
    variance_lyapunov,
    variance_spectral,
)
from .magnetoelastic import (
    MaterialParams,
    ModeField,
    ModeFieldError,
    StrainComponents,
    coupling_strength,
    integrated_strain,
    load_mode_field,
    normalization_ratio,
    strain_tensor,
)
from .parameters import (
    DriveSpec,
    RawConfig,
    SystemParams,
    ValidationError,
    derive_params,
    drive_amplitude,
    load_config,
    params_snapshot,
    parse_config,
    rabi_from_field,
    thermal_occupation,
)
from .sensing import (
    ResolutionResult,
    SensingError,
    SensingPoint,
    SteadyPoint,
    SweepResult,
    resolution,
    snr_at,
    squeezing_gain,
    sweep,
    sweep_steady,
)
from .steady_state import (
    LinearEstimate,
    MeterWindow,
    OutOfRangeError,
    SolverError,
    SteadyState,
    SteadyStateError,
    WindowEmptyError,
    cavity_quadratures,
    invert_population,
    linear_phase_estimate,
    linear_slope,
    measuring_window,
    solve_steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "GYROMAGNETIC_YIG", "HBAR", "K_BOLTZMANN", "angular_to_hz", "hz_to_angular",
    "DriveSpec", "RawConfig", "SystemParams", "ValidationError", "derive_params",
    "drive_amplitude", "load_config", "params_snapshot", "parse_config", "rabi_from_field",
    "thermal_occupation",
    "LinearEstimate", "MeterWindow", "OutOfRangeError", "SolverError", "SteadyState",
    "SteadyStateError", "WindowEmptyError", "cavity_quadratures",
    "invert_population", "linear_phase_estimate", "linear_slope",
    "measuring_window", "solve_steady_state",
    "FluctuationError", "LinearizedSystem", "QuadratureError", "StabilityReport",
    "UnstableSystemError", "VarianceResult", "build_linearized", "char_poly",
    "nsd_explicit", "nsd_resolvent", "routh_hurwitz", "stability",
    "variance_lyapunov", "variance_spectral",
    "ResolutionResult", "SensingError", "SensingPoint", "SteadyPoint",
    "SweepResult", "resolution", "snr_at", "squeezing_gain", "sweep",
    "sweep_steady",
    "MaterialParams", "ModeField", "ModeFieldError", "StrainComponents",
    "coupling_strength", "integrated_strain", "load_mode_field",
    "normalization_ratio", "strain_tensor",
    "__version__",
]
