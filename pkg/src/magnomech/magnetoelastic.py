"""Magnetostrictive coupling rate from a sampled displacement mode.

The single-phonon magnon frequency shift of a Kittel mode magnetized along z is

    g_mb = (b1 / M_s) * gamma * d_zpm * (1/V) * Integral[exx + eyy - 2*ezz] dV

with the strain built from the dimensionless mode profile chi(r): the uniaxial
combination exx + eyy - 2*ezz is what the magnetoelastic energy b1*sum(e_ii
m_i^2) picks out for a uniform precession about z. The profile arrives as a
CSV sample on a rectilinear tensor grid plus a JSON sidecar carrying the
scalar physics (zero-point motion, magnetoelastic constant, saturation
magnetization, optionally the normalization volume).

Derivatives use second-order finite differences, one-sided at the faces, so
the integrated strain converges as O(h^2) in the grid spacing.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constants import GYROMAGNETIC_YIG

_trapz = getattr(np, "trapezoid", None) or np.trapz

CSV_HEADER = ("x", "y", "z", "chi_x", "chi_y", "chi_z")
_MAX_REPORTED_NODES = 5


class ModeFieldError(Exception):
    """Malformed mode file: bad header, missing nodes, bad sidecar."""


@dataclass(frozen=True, eq=False)
class ModeField:
    """Displacement profile chi on a rectilinear grid.

    Component arrays are indexed [ix, iy, iz] against the 1D coordinate
    arrays; coordinates are in meters and chi is dimensionless.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    chi_x: np.ndarray
    chi_y: np.ndarray
    chi_z: np.ndarray

    @property
    def box_volume(self) -> float:
        return float(
            (self.x[-1] - self.x[0]) * (self.y[-1] - self.y[0]) * (self.z[-1] - self.z[0])
        )


@dataclass(frozen=True)
class MaterialParams:
    b1: float          # magnetoelastic constant, J/m^3
    M_s: float         # saturation magnetization, A/m
    d_zpm: float       # zero-point motion of the phonon mode, m
    V: float           # normalization volume, m^3
    gamma: float = GYROMAGNETIC_YIG   # gyromagnetic ratio, rad/s/T


@dataclass(frozen=True, eq=False)
class StrainComponents:
    """Symmetric strain tensor fields e_ij = (d_i u_j + d_j u_i)/2."""

    xx: np.ndarray
    yy: np.ndarray
    zz: np.ndarray
    xy: np.ndarray
    xz: np.ndarray
    yz: np.ndarray


def _read_rows(path: Path) -> list[tuple[float, ...]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ModeFieldError(f"{path}: empty mode file")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ModeFieldError(
                f"{path}: header must be {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise ModeFieldError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
            try:
                rows.append(tuple(float(v) for v in row))
            except ValueError as exc:
                raise ModeFieldError(f"{path}:{lineno}: {exc}")
    if not rows:
        raise ModeFieldError(f"{path}: no data rows")
    return rows


def _sidecar(path: Path) -> dict:
    side = path.with_suffix(".json")
    if not side.exists():
        raise ModeFieldError(f"missing sidecar {side} (needs d_zpm, b1, M_s)")
    try:
        with open(side) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModeFieldError(f"{side}: invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise ModeFieldError(f"{side}: sidecar must be a JSON object")
    missing = [k for k in ("d_zpm", "b1", "M_s") if k not in data]
    if missing:
        raise ModeFieldError(f"{side}: missing keys: {', '.join(missing)}")
    unknown = sorted(set(data) - {"d_zpm", "b1", "M_s", "V", "gamma", "grid"})
    if unknown:
        raise ModeFieldError(f"{side}: unknown keys: {', '.join(unknown)}")
    for k, v in data.items():
        if k == "grid":
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ModeFieldError(f"{side}: {k} must be a positive number, got {v!r}")
    grid = data.get("grid")
    if grid is not None:
        if (not isinstance(grid, dict) or set(grid) != {"nx", "ny", "nz"}
                or not all(isinstance(grid[k], int) and grid[k] >= 3 for k in grid)):
            raise ModeFieldError(
                f"{side}: grid must be an object with integer nx, ny, nz >= 3"
            )
    return data


def load_mode_field(path: str | Path) -> tuple[ModeField, MaterialParams]:
    """Read a mode CSV and its sidecar.

    Rows may arrive in any order; what matters is that the sampled points form
    a complete tensor grid. Missing or duplicated nodes are reported with
    their coordinates.
    """
    path = Path(path)
    rows = _read_rows(path)

    xs = np.array(sorted({r[0] for r in rows}))
    ys = np.array(sorted({r[1] for r in rows}))
    zs = np.array(sorted({r[2] for r in rows}))
    for name, arr in (("x", xs), ("y", ys), ("z", zs)):
        if arr.size < 3:
            raise ModeFieldError(
                f"{path}: axis {name} has {arr.size} distinct values; "
                "second-order differences need at least 3"
            )
    shape = (xs.size, ys.size, zs.size)
    expected = shape[0] * shape[1] * shape[2]

    ix = {v: i for i, v in enumerate(xs)}
    iy = {v: i for i, v in enumerate(ys)}
    iz = {v: i for i, v in enumerate(zs)}
    comps = [np.full(shape, np.nan) for _ in range(3)]
    seen = np.zeros(shape, dtype=bool)
    dupes = []
    for r in rows:
        i, j, k = ix[r[0]], iy[r[1]], iz[r[2]]
        if seen[i, j, k]:
            dupes.append((r[0], r[1], r[2]))
            continue
        seen[i, j, k] = True
        comps[0][i, j, k], comps[1][i, j, k], comps[2][i, j, k] = r[3], r[4], r[5]
    if dupes:
        listed = "; ".join(f"({a:g}, {b:g}, {c:g})" for a, b, c in dupes[:_MAX_REPORTED_NODES])
        raise ModeFieldError(f"{path}: duplicate grid nodes: {listed}")
    if len(rows) != expected or not seen.all():
        holes = np.argwhere(~seen)
        listed = "; ".join(
            f"({xs[i]:g}, {ys[j]:g}, {zs[k]:g})" for i, j, k in holes[:_MAX_REPORTED_NODES]
        )
        raise ModeFieldError(
            f"{path}: incomplete tensor grid, {len(rows)} rows for a "
            f"{shape[0]}x{shape[1]}x{shape[2]} grid; missing nodes: {listed}"
        )

    mode = ModeField(x=xs, y=ys, z=zs, chi_x=comps[0], chi_y=comps[1], chi_z=comps[2])
    meta = _sidecar(path)
    grid = meta.get("grid")
    if grid is not None and (grid["nx"], grid["ny"], grid["nz"]) != shape:
        raise ModeFieldError(
            f"{path}: sidecar declares a {grid['nx']}x{grid['ny']}x{grid['nz']} grid "
            f"but the CSV holds {shape[0]}x{shape[1]}x{shape[2]}"
        )
    material = MaterialParams(
        b1=float(meta["b1"]),
        M_s=float(meta["M_s"]),
        d_zpm=float(meta["d_zpm"]),
        V=float(meta.get("V", mode.box_volume)),
        gamma=float(meta.get("gamma", GYROMAGNETIC_YIG)),
    )
    ratio = normalization_ratio(mode, material.V)
    if abs(ratio - 1.0) > 0.01:
        warnings.warn(
            f"{path}: mode normalization integral over V is {ratio:.4g}, more than "
            "1% away from 1; pass normalize=True to coupling_strength or rescale "
            "the profile",
            stacklevel=2,
        )
    return mode, material


def strain_tensor(mode: ModeField) -> StrainComponents:
    """Symmetric strain of the mode profile, second-order accurate."""
    dxx = np.gradient(mode.chi_x, mode.x, axis=0, edge_order=2)
    dyy = np.gradient(mode.chi_y, mode.y, axis=1, edge_order=2)
    dzz = np.gradient(mode.chi_z, mode.z, axis=2, edge_order=2)
    dxy = np.gradient(mode.chi_x, mode.y, axis=1, edge_order=2)
    dyx = np.gradient(mode.chi_y, mode.x, axis=0, edge_order=2)
    dxz = np.gradient(mode.chi_x, mode.z, axis=2, edge_order=2)
    dzx = np.gradient(mode.chi_z, mode.x, axis=0, edge_order=2)
    dyz = np.gradient(mode.chi_y, mode.z, axis=2, edge_order=2)
    dzy = np.gradient(mode.chi_z, mode.y, axis=1, edge_order=2)
    return StrainComponents(
        xx=dxx, yy=dyy, zz=dzz,
        xy=0.5 * (dxy + dyx), xz=0.5 * (dxz + dzx), yz=0.5 * (dyz + dzy),
    )


def _volume_integral(mode: ModeField, w: np.ndarray) -> float:
    return float(_trapz(_trapz(_trapz(w, mode.z, axis=2), mode.y, axis=1), mode.x, axis=0))


def integrated_strain(mode: ModeField) -> float:
    """Integral of exx + eyy - 2*ezz over the grid box (trapezoid rule)."""
    e = strain_tensor(mode)
    return _volume_integral(mode, e.xx + e.yy - 2.0 * e.zz)


def normalization_ratio(mode: ModeField, V: float) -> float:
    """Integral of |chi|^2 over the box, divided by V; 1 for a normalized mode."""
    if V <= 0.0:
        raise ModeFieldError(f"normalization volume must be positive, got {V!r}")
    return _volume_integral(mode, mode.chi_x**2 + mode.chi_y**2 + mode.chi_z**2) / V


def coupling_strength(mode: ModeField, material: MaterialParams,
                      normalize: bool = False) -> float:
    """Magnetostrictive coupling rate g_mb in rad/s (signed).

    With normalize=True the profile is rescaled to the eigenmode convention
    Integral |chi|^2 dV = V before differentiating, which makes d_zpm the
    physical amplitude scale regardless of how the upstream solver scaled its
    output.
    """
    if normalize:
        ratio = normalization_ratio(mode, material.V)
        if ratio == 0.0:
            raise ModeFieldError("cannot normalize an identically zero mode profile")
        scale = 1.0 / np.sqrt(ratio)
        mode = ModeField(x=mode.x, y=mode.y, z=mode.z,
                         chi_x=mode.chi_x * scale, chi_y=mode.chi_y * scale,
                         chi_z=mode.chi_z * scale)
    integral = integrated_strain(mode)
    return (material.b1 / material.M_s) * material.gamma * material.d_zpm \
        * integral / material.V
