"""Classical steady state of the driven magnon-phonon-photon system.

The semiclassical fixed point couples three amplitudes: the magnon amplitude
<m>, the cavity amplitude <c>, and the static mechanical displacement <q>. Both
dispersive couplings push on the oscillator, so the effective detunings

    dtm = delta_m + g_mb * q        (magnon)
    dtc = delta_c - g_cb * q        (cavity)

depend on the very displacement the mode populations create.

Two solving regimes:

* population mode -- the magnon number N_m and its effective detuning are held,
  the Rabi rate is back-solved, and the displacement is the magnetostrictive
  one, q = -g_mb*N_m/omega_b. This is the meter's operating point: the cavity
  is a weak probe whose own radiation pressure is below the meter's working
  window by construction, and the solution is closed-form.

* rabi / field mode -- the Rabi rate is fixed and q is found as a root of the
  scalar self-consistency map F(q). The map can have several roots (static
  multistability); all are reported, and the root continuously connected to the
  undriven system (q = 0) is returned as the default operating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .parameters import SystemParams

SQRT2 = math.sqrt(2.0)

RESIDUAL_RTOL = 1e-12     # |F(q)| < RESIDUAL_RTOL * max(1, |q|) for returned roots
_SCAN_POINTS = 20001
_CONTINUATION_STEPS = 32


class SteadyStateError(Exception):
    """Base class for classical-solve failures."""


class SolverError(SteadyStateError):
    """Root finding failed to converge or lost its bracket."""


class WindowEmptyError(SteadyStateError):
    """The measuring window closed: its two inequalities cannot hold at once."""


class OutOfRangeError(SteadyStateError):
    """A measured phase lies outside the linear meter's image.

    Carries `fallback_N_m`: the population obtained by inverting the exact
    detuned-cavity response instead of the linear meter line, or None when the
    phase exceeds even the exact model's maximum.
    """

    def __init__(self, message: str, fallback_N_m: float | None):
        super().__init__(message)
        self.fallback_N_m = fallback_N_m


@dataclass(frozen=True)
class SteadyState:
    """Classical operating point. Immutable; amplitudes in natural (quanta) units."""

    mode: str                 # drive mode that produced it
    m_avg: complex
    c_avg: complex
    q_avg: float
    p_avg: float              # stationary momentum, identically 0
    N_m: float                # |m_avg|^2
    N_c: float                # |c_avg|^2
    delta_m_eff: float
    delta_c_eff: float
    delta_m_bare: float
    Omega: float              # Rabi rate actually applied (back-solved in population mode)
    residual: float           # self-consistency residual of q_avg
    multistable: bool
    all_roots: tuple[float, ...]


@dataclass(frozen=True)
class MeterWindow:
    """Operating window of the linear phase meter.

    N_min: population above which the cavity's own radiation pressure is a
           sub-`margin` correction to the magnetostrictive displacement.
    N_max: population below which the induced detuning stays under
           `margin * kappa_c`, keeping the phase response linear.
    slope: phase per magnon of the linear meter.
    bound: parameter-independent ceiling on |Y_c|/N_m set by the requirement
           that the drive itself respects the window, 2*sqrt2*g_mb/sqrt(kc*wb).
    """

    N_min: float
    N_max: float
    slope: float
    bound: float
    margin: float


def magnon_amplitude(omega_rabi: float, delta_m_eff: float, kappa_m: float) -> complex:
    """<m> = Omega / (i*dtm + kappa_m/2)."""
    return omega_rabi / complex(kappa_m / 2.0, delta_m_eff)


def cavity_amplitude(E: float, delta_c_eff: float, kappa_c: float) -> complex:
    """<c> = E / (i*dtc + kappa_c/2)."""
    return E / complex(kappa_c / 2.0, delta_c_eff)


def selfconsistency_map(p: SystemParams, omega_rabi: float, delta_m_bare: float, q,
                        E: float | None = None):
    """F(q) whose roots are stationary displacements (rabi/field mode).

    F(q) = [g_cb*E^2/(dtc(q)^2 + kc^2/4) - g_mb*Omega^2/(dtm(q)^2 + km^2/4)]/omega_b - q

    Accepts scalar or ndarray q. E overrides the configured drive amplitude
    (used by the ramp-up continuation).
    """
    if E is None:
        E = p.E
    dtc = p.delta_c - p.g_cb * q
    dtm = delta_m_bare + p.g_mb * q
    cav = p.g_cb * E**2 / (dtc**2 + p.kappa_c**2 / 4.0)
    mag = p.g_mb * omega_rabi**2 / (dtm**2 + p.kappa_m**2 / 4.0)
    return (cav - mag) / p.omega_b - q


def _scan_bracket(p: SystemParams, omega_rabi: float, E: float) -> tuple[float, float]:
    # Extremes of the two Lorentzian pushes, padded 1.5x; F is positive at the
    # low end and negative at the high end, so all roots live inside.
    lo = -1.5 * p.g_mb * omega_rabi**2 / (p.omega_b * p.kappa_m**2 / 4.0)
    hi = 1.5 * p.g_cb * E**2 / (p.omega_b * p.kappa_c**2 / 4.0)
    return lo, hi


def _roots_in_bracket(p: SystemParams, omega_rabi: float, delta_m_bare: float,
                      E: float, n: int = _SCAN_POINTS) -> list[float]:
    lo, hi = _scan_bracket(p, omega_rabi, E)
    if hi - lo <= 0.0:
        return [0.0] if lo == 0.0 == hi else []
    grid = np.linspace(lo, hi, n)
    vals = selfconsistency_map(p, omega_rabi, delta_m_bare, grid, E=E)
    roots: list[float] = []
    exact = np.flatnonzero(vals == 0.0)
    roots.extend(float(grid[i]) for i in exact)
    flips = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    f = lambda q: float(selfconsistency_map(p, omega_rabi, delta_m_bare, q, E=E))
    for i in flips:
        try:
            r = brentq(f, grid[i], grid[i + 1], xtol=1e-30, rtol=8.9e-16, maxiter=200)
        except (ValueError, RuntimeError) as exc:
            raise SolverError(f"bracketed refinement failed on [{grid[i]}, {grid[i+1]}]: {exc}")
        roots.append(float(r))
    roots.sort()
    # collapse duplicates from an exact zero sitting on a grid node
    dedup: list[float] = []
    for r in roots:
        if not dedup or abs(r - dedup[-1]) > 1e-12 * max(1.0, abs(r)):
            dedup.append(r)
    return dedup


def _default_root(p: SystemParams, omega_rabi: float, delta_m_bare: float,
                  roots: list[float]) -> float:
    """Pick the root continuously connected to q = 0 by ramping both drives."""
    if len(roots) == 1:
        return roots[0]
    tracked = 0.0
    for lam in np.linspace(1.0 / _CONTINUATION_STEPS, 1.0, _CONTINUATION_STEPS):
        s = math.sqrt(lam)
        step_roots = _roots_in_bracket(p, omega_rabi * s, delta_m_bare, p.E * s)
        if not step_roots:
            continue
        tracked = min(step_roots, key=lambda r: abs(r - tracked))
    return min(roots, key=lambda r: abs(r - tracked))


def solve_steady_state(p: SystemParams) -> SteadyState:
    """Solve the classical fixed point for the configured drive mode."""
    if p.drive.mode == "population":
        return _solve_population(p)
    return _solve_rabi(p, p.Omega if p.Omega is not None else 0.0)


def _solve_population(p: SystemParams) -> SteadyState:
    N_m = float(p.drive.N_m)
    dtm = p.delta_m_eff
    omega_rabi = math.sqrt(N_m) * math.sqrt(dtm**2 + p.kappa_m**2 / 4.0)
    q = -p.g_mb * N_m / p.omega_b
    dtc = p.delta_c - p.g_cb * q
    m = magnon_amplitude(omega_rabi, dtm, p.kappa_m) if omega_rabi > 0.0 else 0.0j
    c = cavity_amplitude(p.E, dtc, p.kappa_c)
    # residual of the closed-form defining relation q = -g_mb*N_m/omega_b
    residual = abs(q + p.g_mb * N_m / p.omega_b)
    return SteadyState(
        mode="population",
        m_avg=m,
        c_avg=c,
        q_avg=q,
        p_avg=0.0,
        N_m=abs(m) ** 2 if omega_rabi > 0.0 else 0.0,
        N_c=abs(c) ** 2,
        delta_m_eff=dtm,
        delta_c_eff=dtc,
        delta_m_bare=dtm - p.g_mb * q,
        Omega=omega_rabi,
        residual=residual,
        multistable=False,
        all_roots=(q,),
    )


def _solve_rabi(p: SystemParams, omega_rabi: float) -> SteadyState:
    delta_m_bare = p.delta_m_eff
    roots = _roots_in_bracket(p, omega_rabi, delta_m_bare, p.E)
    if not roots:
        lo, hi = _scan_bracket(p, omega_rabi, p.E)
        raise SolverError(
            f"no stationary displacement found in bracket [{lo:.6e}, {hi:.6e}]"
        )
    q = _default_root(p, omega_rabi, delta_m_bare, roots)

    residual = abs(float(selfconsistency_map(p, omega_rabi, delta_m_bare, q)))
    if residual >= RESIDUAL_RTOL * max(1.0, abs(q)):
        raise SolverError(f"root residual {residual:.3e} too large at q = {q:.6e}")

    dtm = delta_m_bare + p.g_mb * q
    dtc = p.delta_c - p.g_cb * q
    m = magnon_amplitude(omega_rabi, dtm, p.kappa_m) if omega_rabi > 0.0 else 0.0j
    c = cavity_amplitude(p.E, dtc, p.kappa_c)
    return SteadyState(
        mode=p.drive.mode,
        m_avg=m,
        c_avg=c,
        q_avg=q,
        p_avg=0.0,
        N_m=abs(m) ** 2,
        N_c=abs(c) ** 2,
        delta_m_eff=dtm,
        delta_c_eff=dtc,
        delta_m_bare=delta_m_bare,
        Omega=omega_rabi,
        residual=residual,
        multistable=len(roots) > 1,
        all_roots=tuple(roots),
    )


# --- phase meter ------------------------------------------------------------

def cavity_quadratures(s: SteadyState) -> tuple[float, float]:
    """Mean cavity quadratures (X_c, Y_c) = sqrt2*(Re<c>, Im<c>).

    The phase quadrature carries the displacement signal:
    Y_c = -sqrt2*E*dtc/(dtc^2 + kc^2/4), so Y_c <= 0 whenever dtc >= 0.
    """
    return SQRT2 * s.c_avg.real, SQRT2 * s.c_avg.imag


def linear_slope(p: SystemParams) -> float:
    """Phase magnitude per magnon of the linearized meter, 4*sqrt2*E*g_cb*g_mb/(kc^2*wb)."""
    return 4.0 * SQRT2 * p.E * p.g_cb * p.g_mb / (p.kappa_c**2 * p.omega_b)


@dataclass(frozen=True)
class LinearEstimate:
    """Linearized meter prediction together with its own validity report."""

    Y_c: float            # signed estimate, -slope * N_m
    shift_ratio: float    # induced detuning over linewidth, dtc/kappa_c
    within_linear: bool   # shift_ratio <= LINEAR_SHIFT_MAX


LINEAR_SHIFT_MAX = 0.1    # dtc/kappa_c beyond this the linear meter line degrades


def linear_phase_estimate(p: SystemParams, N_m: float) -> LinearEstimate:
    """Small-detuning meter line Y_c ~= -slope * N_m (signed).

    Validity is reported, not enforced: shift_ratio is the induced detuning
    relative to the cavity linewidth at this population.
    """
    ratio = p.g_cb * p.g_mb * N_m / (p.omega_b * p.kappa_c)
    return LinearEstimate(
        Y_c=-linear_slope(p) * N_m,
        shift_ratio=ratio,
        within_linear=ratio <= LINEAR_SHIFT_MAX,
    )


def invert_population(p: SystemParams, Y_measured: float) -> float:
    """Magnon population from a measured phase quadrature via the meter line.

    N_m = |Y| * kc^2 * wb / (4*sqrt2*E*g_cb*g_mb). Valid only while the phase
    sits inside the linear window's image (|dtc| <= 0.1*kappa_c); beyond it an
    OutOfRangeError is raised carrying the exact-response inversion as fallback.
    """
    slope = linear_slope(p)
    if slope == 0.0:
        raise SteadyStateError("meter has zero slope (no laser drive or zero coupling)")
    absY = abs(Y_measured)
    # image of the linear window: dtc up to 0.1*kappa_c
    y_edge = slope * 0.1 * p.kappa_c * p.omega_b / (p.g_cb * p.g_mb)
    if absY <= y_edge:
        return absY / slope

    # exact response |Y| = sqrt2*E*dtc/(dtc^2+kc^2/4): invert the first branch
    y_peak = SQRT2 * p.E / p.kappa_c
    if absY > y_peak * (1.0 + 1e-12):
        raise OutOfRangeError(
            f"|Y| = {absY:.6e} exceeds the exact response maximum {y_peak:.6e}; "
            "no population reproduces it",
            None,
        )
    disc = max(2.0 * p.E**2 - absY**2 * p.kappa_c**2, 0.0)
    dtc = (SQRT2 * p.E - math.sqrt(disc)) / (2.0 * absY)
    fallback = dtc * p.omega_b / (p.g_cb * p.g_mb)
    raise OutOfRangeError(
        f"|Y| = {absY:.6e} lies beyond the linear meter image (edge {y_edge:.6e}); "
        f"exact-response inversion gives N_m = {fallback:.6e}",
        fallback,
    )


def measuring_window(p: SystemParams, margin: float = 0.1) -> MeterWindow:
    """Population window where the meter is linear and backaction-free.

    Both "much less than" conditions are enforced with the same margin factor:
    the cavity's radiation-pressure shift must stay below margin times the
    magnetostrictive one (sets N_min), and the induced detuning must stay below
    margin*kappa_c (sets N_max).
    """
    if not (0.0 < margin < 1.0):
        raise SteadyStateError(f"margin must lie in (0, 1), got {margin}")
    bound = 2.0 * SQRT2 * p.g_mb / math.sqrt(p.kappa_c * p.omega_b)
    if p.g_cb == 0.0:
        return MeterWindow(N_min=0.0, N_max=math.inf, slope=0.0, bound=bound, margin=margin)
    N_c_res = 4.0 * p.E**2 / p.kappa_c**2
    N_min = p.g_cb * N_c_res / (margin * p.g_mb) if p.g_mb > 0.0 else math.inf
    N_max = margin * p.kappa_c * p.omega_b / (p.g_cb * p.g_mb) if p.g_mb > 0.0 else math.inf
    if not N_min < N_max:
        raise WindowEmptyError(
            f"empty measuring window: N_min = {N_min:.6e} >= N_max = {N_max:.6e}; "
            "the backaction condition (g_cb^2*N_c/wb << g_cb*g_mb*N_m/wb) collides "
            "with the weak-shift condition (g_cb*g_mb*N_m/wb << kappa_c) at this "
            "laser power and margin"
        )
    return MeterWindow(N_min=N_min, N_max=N_max, slope=linear_slope(p), bound=bound,
                       margin=margin)
