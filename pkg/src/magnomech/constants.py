"""Physical constants used throughout the package.

All internal frequencies, rates, and couplings are angular (rad/s). Helpers for
converting ordinary frequencies in Hz live here so every module shares one 2*pi.
"""
from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi

HBAR = 1.054571817e-34      # J s
K_BOLTZMANN = 1.380649e-23  # J/K  (exact, SI)
C_LIGHT = 2.99792458e8      # m/s  (exact)

# Gyromagnetic ratio of the ferromagnet's spins, angular units. 28 GHz/T is the
# standard value for YIG and is what the field-amplitude drive conversion assumes.
GYROMAGNETIC_YIG = TWO_PI * 28.0e9  # rad/s per tesla


def hz_to_angular(f: float) -> float:
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * f


def angular_to_hz(omega: float) -> float:
    """Angular frequency (rad/s) to ordinary frequency (Hz)."""
    return omega / TWO_PI
