"""Magnon-number sensing figures of merit.

The signal is the exact steady-state phase magnitude |Y_c| at the operating
population; the noise is the stationary phase-quadrature spread sqrt(<dY_c^2>)
at the same point, so the backaction of the population being measured is part
of its own noise floor. SNR is reported both as a plain ratio and in decibels,
10*log10(ratio): with that convention the smallest resolvable population is
the ratio-1 crossing and squeezing the input noise variance by s dB buys at
most s/2 dB of SNR.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np

from .fluctuations import UnstableSystemError, build_linearized, variance_lyapunov
from .parameters import DriveSpec, SystemParams, params_snapshot
from .steady_state import (
    SteadyState,
    cavity_quadratures,
    measuring_window,
    solve_steady_state,
)


class SensingError(Exception):
    """Sensing-level failure: bad bracket, bad axis, non-monotone SNR."""


@dataclass(frozen=True)
class SensingPoint:
    """One operating point of the meter, signal and noise evaluated together."""

    N_m: float
    abs_Yc: float             # exact steady-state |Y_c|
    sigma_Y: float            # sqrt(<dY_c^2>), nan when unstable
    snr_linear: float         # abs_Yc / sigma_Y, nan when unstable
    snr_db: float             # 10*log10(snr_linear), -inf at zero signal
    temperature: float
    laser_power: float
    stable: bool


@dataclass(frozen=True)
class SteadyPoint:
    N_m: float
    Y_c: float
    X_c: float
    abs_Yc: float
    delta_c_eff: float
    linear: bool              # inside the weak-shift window |dtc| <= 0.1*kappa_c


@dataclass(frozen=True)
class SweepResult:
    """Ordered sweep with provenance.

    grid carries the raw axis values; for the N_m axis they repeat the points'
    populations, for the others (P_L, kappa_c, T) they are the only record of
    the varied quantity not already a point field.
    """

    axis: str
    grid: tuple[float, ...]
    points: tuple[Any, ...]   # SensingPoint rows, or SteadyPoint for sweep_steady
    params: dict[str, Any]    # full parameter snapshot of the base configuration


@dataclass(frozen=True)
class ResolutionResult:
    N_m: float                # smallest population with SNR >= 1
    below_floor: bool         # SNR already >= 1 at the bracket bottom
    bracket: tuple[float, float]


SWEEP_AXES = ("N_m", "P_L", "kappa_c", "T")

_AXIS_FIELD = {"P_L": "laser_power", "kappa_c": "kappa_c", "T": "temperature"}


def _at_population(p: SystemParams, N_m: float) -> SystemParams:
    return p.updated(drive=DriveSpec(mode="population", N_m=float(N_m)))


def _drive_population(p: SystemParams) -> float:
    if p.drive.mode != "population" or p.drive.N_m is None:
        raise SensingError(
            "operating population is ambiguous: configure drive_mode population "
            "or pass N_m explicitly"
        )
    return p.drive.N_m


def _sigma_Y(p: SystemParams, s: SteadyState) -> float:
    linsys = build_linearized(p, s)
    return math.sqrt(variance_lyapunov(linsys).value)


def _db(ratio: float) -> float:
    return 10.0 * math.log10(ratio) if ratio > 0.0 else -math.inf


def _point(p: SystemParams, N_m: float, allow_unstable: bool = False) -> SensingPoint:
    p_N = _at_population(p, N_m)
    s = solve_steady_state(p_N)
    absY = abs(cavity_quadratures(s)[1])
    try:
        sigma = _sigma_Y(p_N, s)
    except UnstableSystemError:
        if not allow_unstable:
            raise
        return SensingPoint(N_m=N_m, abs_Yc=absY, sigma_Y=math.nan,
                            snr_linear=math.nan, snr_db=math.nan,
                            temperature=p.temperature, laser_power=p.laser_power,
                            stable=False)
    ratio = absY / sigma
    return SensingPoint(N_m=N_m, abs_Yc=absY, sigma_Y=sigma, snr_linear=ratio,
                        snr_db=_db(ratio), temperature=p.temperature,
                        laser_power=p.laser_power, stable=True)


def snr_at(p: SystemParams, N_m: float) -> SensingPoint:
    """Meter SNR at one population: exact |Y_c| against the stationary noise.

    Raises UnstableSystemError when the operating point has no stationary
    state; N_m = 0 gives zero signal, hence snr_db = -inf.
    """
    return _point(p, float(N_m), allow_unstable=False)


def resolution(p: SystemParams, N_lo: float = 1e4, N_hi: float | None = None,
               rtol: float = 1e-6) -> ResolutionResult:
    """Smallest population with unit SNR, by bisection on log10(N_m).

    The default upper end is the linear window's ceiling. The SNR is checked
    to be monotone across the bracket first; if the ratio already exceeds one
    at the bottom the floor itself is returned, flagged below_floor.
    """
    if N_hi is None:
        N_hi = measuring_window(p).N_max
    if not (0.0 < N_lo < N_hi) or not math.isfinite(N_hi):
        raise SensingError(f"invalid bracket [{N_lo:.3e}, {N_hi:.3e}]")

    probes = np.logspace(math.log10(N_lo), math.log10(N_hi), 8)
    ratios = [snr_at(p, N).snr_linear for N in probes]
    if any(b < a * (1.0 - 1e-9) for a, b in zip(ratios[:-1], ratios[1:])):
        raise SensingError(
            "SNR is not monotone across the bracket; the unit crossing is ambiguous"
        )
    if ratios[0] >= 1.0:
        return ResolutionResult(N_m=N_lo, below_floor=True, bracket=(N_lo, N_hi))
    if ratios[-1] < 1.0:
        raise SensingError(
            f"SNR stays below one up to N_m = {N_hi:.3e}; nothing resolvable in bracket"
        )

    lo, hi = math.log10(N_lo), math.log10(N_hi)
    # stop once the bracket width maps to a relative spread below rtol
    tol = math.log10(1.0 + rtol)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if snr_at(p, 10.0 ** mid).snr_linear >= 1.0:
            hi = mid
        else:
            lo = mid
    return ResolutionResult(N_m=10.0 ** hi, below_floor=False, bracket=(N_lo, N_hi))


def squeezing_gain(p: SystemParams, s_db: float, N_m: float | None = None) -> float:
    """SNR gain in dB from s_db of input phase squeezing, against s = 0.

    The comparison replaces whatever squeezing p carries. At fixed population
    the signal cancels, so the gain is the noise suppression 10*log10(s0/s1);
    it saturates below s_db/2 whenever anti-squeezed amplitude noise feeds
    back through the mechanics or thermal noise dominates the floor.
    """
    if s_db == 0.0:
        return 0.0
    if N_m is None:
        N_m = _drive_population(p)
    with_s = snr_at(p.updated(squeeze_db=float(s_db)), N_m)
    without = snr_at(p.updated(squeeze_db=0.0), N_m)
    return with_s.snr_db - without.snr_db


def _validate_grid(grid) -> tuple[float, ...]:
    values = tuple(float(x) for x in grid)
    if not values:
        raise SensingError("sweep grid is empty")
    if len(values) > 1:
        diffs = np.diff(values)
        if not (np.all(diffs > 0.0) or np.all(diffs < 0.0)):
            raise SensingError("sweep grid must be strictly monotone")
    return values


def sweep(p: SystemParams, axis: str, grid, workers: int | None = None) -> SweepResult:
    """Full-pipeline sweep along one axis; unstable points become gaps.

    axis is one of N_m, P_L, kappa_c, T. For the non-population axes the
    operating N_m is taken from the configured population drive and the varied
    quantity is rebuilt into the parameter set point by point (the drive
    amplitude follows P_L and kappa_c automatically). Points are independent;
    workers > 1 evaluates them in a thread pool, assembled in grid order.
    """
    if axis not in SWEEP_AXES:
        raise SensingError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = _validate_grid(grid)

    if axis == "N_m":
        task = lambda x: _point(p, x, allow_unstable=True)
    else:
        field = _AXIS_FIELD[axis]
        N_op = _drive_population(p)
        task = lambda x: _point(p.updated(**{field: x}), N_op, allow_unstable=True)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = tuple(pool.map(task, values))
    else:
        points = tuple(task(x) for x in values)
    return SweepResult(axis=axis, grid=values, points=points,
                       params=params_snapshot(p))


def sweep_steady(p: SystemParams, N_values) -> SweepResult:
    """Classical response sweep: quadratures and effective detuning per population."""
    values = _validate_grid(N_values)
    points = []
    for N in values:
        s = solve_steady_state(_at_population(p, N))
        X, Y = cavity_quadratures(s)
        points.append(SteadyPoint(
            N_m=N, Y_c=Y, X_c=X, abs_Yc=abs(Y), delta_c_eff=s.delta_c_eff,
            linear=abs(s.delta_c_eff) <= 0.1 * p.kappa_c,
        ))
    return SweepResult(axis="N_m", grid=values, points=tuple(points),
                       params=params_snapshot(p))
