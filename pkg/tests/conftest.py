"""Shared fixtures: reference parameter sets and random stable draws."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from magnomech import SystemParams, derive_params, parse_config

TWO_PI = 2.0 * math.pi

# Reference operating point used throughout: a 10 GHz magnon mode coupled to a
# 10 MHz phonon, read out through a 100 kHz cavity. Frequencies in Hz here;
# parse_config converts to angular units.
BASE_CONFIG = {
    "units": "Hz",
    "omega_m": 10.0e9,
    "omega_b": 10.0e6,
    "omega_c": 2.8e14,
    "kappa_m": 1.0e6,
    "kappa_c": 100.0e3,
    "gamma_b": 100.0,
    "g_mb": 1.0,
    "g_cb": 10.0,
    "delta_m_eff": 0.5e6,
    "laser_power": 1.0e-6,
    "laser_wavelength": 1.064e-6,
    "temperature": 293.0,
    "drive_mode": {"population": 1.0e10},
}


def make_params(**overrides) -> SystemParams:
    """BASE_CONFIG with per-test overrides, run through the full parse path."""
    cfg = dict(BASE_CONFIG)
    cfg.update(overrides)
    return derive_params(parse_config(cfg))


@pytest.fixture
def fig_p() -> SystemParams:
    return make_params()


@pytest.fixture
def cold_p() -> SystemParams:
    return make_params(temperature=0.01)


def write_config(path, **overrides) -> str:
    cfg = dict(BASE_CONFIG)
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return str(path)


def draw_params(rng: np.random.Generator, **fixed) -> SystemParams:
    """Random operating point in the weak-dispersive readout regime.

    Populations are kept inside the linear meter window so that draws are
    overwhelmingly stable; tests that need instability construct it directly.
    """
    over = {
        "kappa_c": 10.0 ** rng.uniform(4.0, 5.5),
        "kappa_m": 10.0 ** rng.uniform(5.5, 6.5),
        "gamma_b": 10.0 ** rng.uniform(1.0, 2.5),
        "g_mb": 10.0 ** rng.uniform(-0.5, 0.5),
        "g_cb": 10.0 ** rng.uniform(0.5, 1.5),
        "delta_m_eff": rng.uniform(0.1, 0.9) * 1.0e6,
        "laser_power": 10.0 ** rng.uniform(-7.0, -6.0),
        "temperature": rng.uniform(0.01, 300.0),
        "drive_mode": {"population": 10.0 ** rng.uniform(8.0, 9.7)},
    }
    over.update(fixed)
    return derive_params(parse_config({**BASE_CONFIG, **over}))


def write_mode_files(tmp_path, name, xs, ys, zs, chi_fn, sidecar):
    """Write a displacement-profile CSV plus its material sidecar.

    chi_fn(x, y, z) -> (chi_x, chi_y, chi_z) is evaluated on the node grid.
    Rows are written in plain nested order; tests that care about ordering
    shuffle them separately.
    """
    rows = ["x,y,z,chi_x,chi_y,chi_z"]
    for x in map(float, xs):
        for y in map(float, ys):
            for z in map(float, zs):
                cx, cy, cz = (float(v) for v in chi_fn(x, y, z))
                rows.append(f"{x!r},{y!r},{z!r},{cx!r},{cy!r},{cz!r}")
    csv_path = tmp_path / f"{name}.csv"
    csv_path.write_text("\n".join(rows) + "\n")
    (tmp_path / f"{name}.json").write_text(json.dumps(sidecar))
    return csv_path


DEFAULT_SIDECAR = {
    "d_zpm": 1.0e-15,
    "b1": 3.5e5,
    "M_s": 1.4e5,
    "V": 1.0e-18,
}
