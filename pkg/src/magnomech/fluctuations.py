"""Linearized quantum fluctuations around the classical operating point.

Quadrature basis, in order: (dX_c, dY_c, dX_m, dY_m, dq, dp). The Langevin
dynamics is du = A u dt + noise, with white-noise correlators collected in a
diagonal diffusion matrix D so that the stationary covariance V solves
A V + V A^T + D = 0.

Steady-state covariances come from two independent routes that must agree:

* a direct Lyapunov solve (vectorized over the 21 independent entries), and
* frequency-domain integration of the symmetrized noise spectral density of
  dY_c, evaluated through an explicit transfer-function formula.

The spectrum itself is also available through a brute-force resolvent at any
frequency; the explicit formula is checked against it in the tests and is the
one fast enough to integrate.

Stability is assessed spectrally (eigenvalues of A, the authoritative verdict)
and, as a cross-check, by a Routh table built in exact rational arithmetic so
that sign decisions near the stability boundary are never at the mercy of
floating-point cancellation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .parameters import SystemParams
from .steady_state import SteadyState

SQRT2 = math.sqrt(2.0)

VAR_RTOL = 1e-3           # quadrature error budget relative to the variance
_OMEGA_MAX_FACTOR = 8.0
_QUAD_LIMIT = 200


class FluctuationError(Exception):
    """Base class for failures in the fluctuation analysis."""


class UnstableSystemError(FluctuationError):
    """No stationary covariance exists; carries the stability report."""

    def __init__(self, message: str, report: "StabilityReport"):
        super().__init__(message)
        self.report = report


class QuadratureError(FluctuationError):
    """Spectral integration error estimate exceeded its budget.

    Carries the offending value and estimate so callers can inspect them.
    """

    def __init__(self, message: str, value: float, err_estimate: float):
        super().__init__(message)
        self.value = value
        self.err_estimate = err_estimate


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """Drift and diffusion of the fluctuations at one operating point."""

    A: np.ndarray             # 6x6 drift
    D: np.ndarray             # 6x6 diagonal diffusion
    params: SystemParams
    steady: SteadyState
    G_c: float                # sqrt2 * g_cb * Re<c>
    G_m: complex              # sqrt2 * g_mb * <m>
    sigma_Xc: float           # input amplitude-quadrature weight, 1/2 * 10^(+s/10)
    sigma_Yc: float           # input phase-quadrature weight,     1/2 * 10^(-s/10)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool                      # eigenvalue verdict (authoritative)
    max_real_part: float
    eigenvalues: tuple[complex, ...]
    routh: str | None                 # "stable" | "unstable" | None (indeterminate)
    routh_reason: str | None          # set when routh is None
    agree: bool | None                # routh vs eigenvalues; None if indeterminate


@dataclass(frozen=True, eq=False)
class VarianceResult:
    value: float                      # stationary <dY_c^2>
    method: str                       # "lyapunov" | "spectral"
    err_estimate: float
    V: np.ndarray | None = None       # full covariance (lyapunov route only)


def build_linearized(p: SystemParams, s: SteadyState) -> LinearizedSystem:
    """Assemble drift and diffusion at the given operating point.

    The cavity mean field is essentially real inside the meter's window; its
    residual phase is dropped so the measurement backaction enters through a
    single real rate G_c, while the magnon coupling keeps its full phase.
    """
    dtc = s.delta_c_eff
    dtm = s.delta_m_eff
    kc, km, gb, wb = p.kappa_c, p.kappa_m, p.gamma_b, p.omega_b
    G_c = SQRT2 * p.g_cb * s.c_avg.real
    G_m = SQRT2 * p.g_mb * s.m_avg
    Gr, Gi = G_m.real, G_m.imag

    A = np.array([
        [-kc / 2.0,  dtc,       0.0,        0.0,       0.0,  0.0],
        [-dtc,      -kc / 2.0,  0.0,        0.0,       G_c,  0.0],
        [0.0,        0.0,      -km / 2.0,   dtm,       Gi,   0.0],
        [0.0,        0.0,      -dtm,       -km / 2.0, -Gr,   0.0],
        [0.0,        0.0,       0.0,        0.0,       0.0,  wb],
        [G_c,        0.0,      -Gr,        -Gi,       -wb,  -gb],
    ])

    gain = 10.0 ** (p.squeeze_db / 10.0)
    sigma_Xc = 0.5 * gain
    sigma_Yc = 0.5 / gain
    D = np.diag([
        kc * sigma_Xc,
        kc * sigma_Yc,
        km * (p.n_m + 0.5),
        km * (p.n_m + 0.5),
        0.0,
        gb * (2.0 * p.n_b + 1.0),
    ])
    return LinearizedSystem(A=A, D=D, params=p, steady=s, G_c=G_c, G_m=G_m,
                            sigma_Xc=sigma_Xc, sigma_Yc=sigma_Yc)


# --- stability --------------------------------------------------------------

def char_poly(A: np.ndarray) -> list[Fraction]:
    """Monic characteristic polynomial coefficients [1, c1, ..., cn], exact.

    Faddeev-LeVerrier recursion on the Fraction-lifted matrix: every float
    entry converts exactly, so the coefficients carry no rounding at all.
    """
    n = A.shape[0]
    M = [[Fraction(A[i, j]) for j in range(n)] for i in range(n)]

    def matmul(X, Y):
        return [[sum(X[i][k] * Y[k][j] for k in range(n)) for j in range(n)]
                for i in range(n)]

    def trace(X):
        return sum(X[i][i] for i in range(n))

    ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    coeffs = [Fraction(1)]
    Mk = [row[:] for row in ident]
    for k in range(1, n + 1):
        AMk = matmul(M, Mk)
        ck = -trace(AMk) / k
        coeffs.append(ck)
        Mk = [[AMk[i][j] + (ck if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def routh_hurwitz(coeffs: list[Fraction]) -> tuple[str | None, str | None]:
    """Routh criterion on exact coefficients.

    Returns (verdict, reason): verdict "stable"/"unstable", or None with a
    reason when the table degenerates (zero pivot or vanishing row), which
    signals eigenvalues on the imaginary axis or a symmetric root pair.
    """
    n = len(coeffs) - 1
    row0 = [coeffs[i] for i in range(0, n + 1, 2)]
    row1 = [coeffs[i] for i in range(1, n + 1, 2)]
    width = len(row0)
    row1 += [Fraction(0)] * (width - len(row1))

    first_col = [row0[0]]
    for _ in range(n):
        if all(x == 0 for x in row1):
            return None, "a Routh row vanished (root pair symmetric about the origin)"
        if row1[0] == 0:
            return None, "zero pivot in the Routh table (marginal root suspected)"
        first_col.append(row1[0])
        nxt = []
        for i in range(width - 1):
            a = row0[i + 1] if i + 1 < width else Fraction(0)
            b = row1[i + 1] if i + 1 < width else Fraction(0)
            nxt.append((row1[0] * a - row0[0] * b) / row1[0])
        nxt.append(Fraction(0))
        row0, row1 = row1, nxt
        if len(first_col) == n + 1:
            break
    sign_changes = sum(
        1 for a, b in zip(first_col[:-1], first_col[1:]) if (a > 0) != (b > 0)
    )
    return ("stable" if sign_changes == 0 else "unstable"), None


def stability(linsys: LinearizedSystem) -> StabilityReport:
    """Eigenvalue verdict plus the exact Routh cross-check."""
    eig = np.linalg.eigvals(linsys.A)
    max_real = float(np.max(eig.real))
    stable = max_real < 0.0
    verdict, reason = routh_hurwitz(char_poly(linsys.A))
    agree = None if verdict is None else (verdict == ("stable" if stable else "unstable"))
    return StabilityReport(
        stable=stable,
        max_real_part=max_real,
        eigenvalues=tuple(complex(z) for z in eig),
        routh=verdict,
        routh_reason=reason,
        agree=agree,
    )


# --- noise spectral density of dY_c ----------------------------------------

def _refuse_unstable(linsys: LinearizedSystem) -> None:
    # cheap eigenvalue gate; the full dual-verdict report is built only on failure
    if float(np.max(np.linalg.eigvals(linsys.A).real)) >= 0.0:
        raise UnstableSystemError(
            "drift matrix is not strictly stable; the stationary spectrum is "
            "undefined", stability(linsys),
        )


def nsd_resolvent(linsys: LinearizedSystem, omega: float,
                  check_stability: bool = True) -> float:
    """S_Yc(omega) by brute force: S = [M D M^dagger]_22 with M = (-iw*I - A)^-1.

    Reference implementation; one dense solve per frequency.
    """
    if check_stability:
        _refuse_unstable(linsys)
    n = linsys.A.shape[0]
    M = np.linalg.inv(-1j * omega * np.eye(n) - linsys.A)
    S = M @ linsys.D @ M.conj().T
    return float(S[1, 1].real)


def nsd_explicit(linsys: LinearizedSystem, omega, check_stability: bool = True):
    """S_Yc(omega) through closed-form transfer functions; scalar or ndarray.

    Every input line (cavity X and Y, magnon X and Y, thermal force) is
    propagated to dY_c analytically; the spectrum is the weighted sum of the
    squared moduli. Algebraically identical to the resolvent route.
    """
    if check_stability:
        _refuse_unstable(linsys)
    p = linsys.params
    s = linsys.steady
    w = np.asarray(omega, dtype=float)
    kc, km, gb, wb = p.kappa_c, p.kappa_m, p.gamma_b, p.omega_b
    dtc, dtm = s.delta_c_eff, s.delta_m_eff
    Gc = linsys.G_c
    Gr, Gi = linsys.G_m.real, linsys.G_m.imag
    Gm2 = Gr * Gr + Gi * Gi

    ac = kc / 2.0 - 1j * w
    am = km / 2.0 - 1j * w
    eta_c = 1.0 / (ac * ac + dtc * dtc)
    eta_m = 1.0 / (am * am + dtm * dtm)
    chi_b = wb / (wb * wb - w * w - 1j * gb * w)

    den = 1.0 - chi_b * (Gc * Gc * dtc * eta_c + Gm2 * dtm * eta_m)
    B = eta_c * ac * Gc * chi_b / den

    sqkc, sqkm = math.sqrt(kc), math.sqrt(km)
    T_xc = -dtc * sqkc * eta_c + B * sqkc * eta_c * Gc * ac
    T_yc = ac * sqkc * eta_c + B * sqkc * eta_c * Gc * dtc
    T_xm = -B * sqkm * eta_m * (Gr * am - Gi * dtm)
    T_ym = -B * sqkm * eta_m * (Gr * dtm + Gi * am)

    S = (linsys.sigma_Xc * np.abs(T_xc) ** 2
         + linsys.sigma_Yc * np.abs(T_yc) ** 2
         + (p.n_m + 0.5) * (np.abs(T_xm) ** 2 + np.abs(T_ym) ** 2)
         + gb * (2.0 * p.n_b + 1.0) * np.abs(B) ** 2)
    if np.ndim(omega) == 0:
        return float(S)
    return S


# --- stationary variance ----------------------------------------------------

def _require_stable(linsys: LinearizedSystem) -> StabilityReport:
    report = stability(linsys)
    if not report.stable:
        raise UnstableSystemError(
            f"drift matrix has an eigenvalue with real part {report.max_real_part:.6e}"
            " >= 0; no stationary covariance exists", report,
        )
    return report


def variance_lyapunov(linsys: LinearizedSystem) -> VarianceResult:
    """Stationary covariance from A V + V A^T + D = 0.

    The symmetric unknown is packed into its 21 upper-triangle entries and the
    21 corresponding equations are solved densely.
    """
    _require_stable(linsys)
    A, D = linsys.A, linsys.D
    n = A.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    index = {pair: k for k, pair in enumerate(pairs)}
    m = len(pairs)
    lhs = np.zeros((m, m))
    rhs = np.zeros(m)
    for row, (i, j) in enumerate(pairs):
        # (A V)_ij + (V A^T)_ij = sum_k A_ik V_kj + A_jk V_ik
        for k in range(n):
            lhs[row, index[tuple(sorted((k, j)))]] += A[i, k]
            lhs[row, index[tuple(sorted((i, k)))]] += A[j, k]
        rhs[row] = -D[i, j]
    sol = np.linalg.solve(lhs, rhs)
    V = np.empty((n, n))
    for (i, j), k in index.items():
        V[i, j] = V[j, i] = sol[k]
    return VarianceResult(value=float(V[1, 1]), method="lyapunov", err_estimate=0.0, V=V)


def _panel_edges(linsys: LinearizedSystem, omega_max: float,
                 report: StabilityReport) -> list[float]:
    """Integration panel boundaries isolating the narrow spectral features.

    The mechanical line is centered near omega_b but its width is the damped
    width of the drift matrix's mechanical eigenvalue pair, which dynamical
    backaction can push far above the bare gamma_b; the nests use whichever
    is larger.
    """
    p = linsys.params
    s = linsys.steady
    mech = min(report.eigenvalues, key=lambda z: abs(abs(z.imag) - p.omega_b))
    width = max(p.gamma_b, 2.0 * abs(mech.real))
    edges = {0.0, omega_max}
    for half in (p.gamma_b, 30.0 * p.gamma_b, 1000.0 * p.gamma_b,
                 width, 30.0 * width, 1000.0 * width):
        edges.add(p.omega_b - half)
        edges.add(p.omega_b + half)
    dm = abs(s.delta_m_eff)
    if dm > 0.0:
        edges.add(dm - p.kappa_m)
        edges.add(dm + p.kappa_m)
    dc = abs(s.delta_c_eff)
    if dc > p.kappa_c:
        edges.add(dc - p.kappa_c)
        edges.add(dc + p.kappa_c)
    return sorted(e for e in edges if 0.0 <= e <= omega_max)


def _panel_quad(f, a: float, b: float) -> tuple[float, float]:
    """One panel of the spectrum integral.

    Panels spanning a wide dynamic range are integrated in log frequency:
    the power-law tails then look exponential, which the adaptive rule
    handles without the early-bailout misjudgments it makes on bare 1/w^2
    decay over a decade. A panel that still provokes an IntegrationWarning
    gets its error estimate floored at its own magnitude, because in that
    state the reported estimate is not trustworthy; the budget check then
    fails loudly instead of passing on fiction.
    """
    if a > 0.0 and b > 8.0 * a:
        g = lambda u: f(math.exp(u)) * math.exp(u)
        lo, hi = math.log(a), math.log(b)
    else:
        g, lo, hi = f, a, b
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        val, e = quad(g, lo, hi, limit=_QUAD_LIMIT, epsabs=0.0, epsrel=1e-10)
    if any(issubclass(w.category, IntegrationWarning) for w in caught):
        e = max(e, abs(val))
    return val, e


def variance_spectral(linsys: LinearizedSystem, rtol: float = VAR_RTOL,
                      refine: bool = True) -> VarianceResult:
    """Stationary <dY_c^2> by integrating the explicit spectrum.

    <dY_c^2> = (1/2pi) * integral of S_Yc over all frequencies; evenness folds
    it onto [0, omega_max] with an analytic 1/w^2 + 1/w^4 tail beyond. With
    refine=False the resonance-aware panel decomposition is skipped and the
    finite range is handed to the quadrature in one piece; the narrow
    mechanical line is then invisible to the sampler, which is exactly the
    failure the panels exist to prevent.
    """
    report = _require_stable(linsys)
    p = linsys.params
    s = linsys.steady
    omega_max = _OMEGA_MAX_FACTOR * max(
        p.omega_b, abs(s.delta_m_eff), abs(s.delta_c_eff), p.kappa_c, p.kappa_m
    )
    edges = _panel_edges(linsys, omega_max, report) if refine else [0.0, omega_max]

    f = lambda w: nsd_explicit(linsys, w, check_stability=False)
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, e = _panel_quad(f, a, b)
        total += val
        err += e

    # large-frequency tail: S ~ D22/w^2 + C/w^4
    D22 = float(linsys.D[1, 1])
    S_edge = nsd_explicit(linsys, omega_max, check_stability=False)
    C = (S_edge * omega_max**2 - D22) * omega_max**2
    tail = D22 / omega_max + C / (3.0 * omega_max**3)

    value = (total + tail) / math.pi
    err_estimate = err / math.pi
    if err_estimate > rtol * abs(value):
        raise QuadratureError(
            f"integration error estimate {err_estimate:.3e} exceeds "
            f"{rtol:.1e} x value ({value:.6e})", value, err_estimate,
        )
    return VarianceResult(value=value, method="spectral", err_estimate=err_estimate)
