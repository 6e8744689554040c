"""Command line front end.

Subcommands: steady, spectrum, sweep, coupling, stability. Each reads a JSON
config (physics keys plus optional tool sections "sweep", "spectrum",
"mode_file" that are peeled off before the physics payload is validated) and
writes CSV or JSON to stdout or --out.

Output files are written atomically and are byte-identical for identical
inputs; anything time-dependent (timestamps, tool version) goes into the
manifest sidecar <out>.manifest.json instead of the data file.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 solver or
quadrature failure, 4 no stationary state at the requested operating point.
"""
from __future__ import annotations

# Thread cap must land in the environment before the numeric stack loads, so
# this block stays above every other import.
import os

_THREADS_RAW = os.environ.get("MAGNOMECH_THREADS")
_THREADS_BAD = False
if _THREADS_RAW is not None:
    if _THREADS_RAW.isdigit() and int(_THREADS_RAW) > 0:
        for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[_var] = _THREADS_RAW
    else:
        _THREADS_BAD = True

import argparse
import contextlib
import hashlib
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .constants import TWO_PI, angular_to_hz
from .fluctuations import (
    FluctuationError,
    UnstableSystemError,
    build_linearized,
    nsd_explicit,
    nsd_resolvent,
    stability,
)
from .magnetoelastic import ModeFieldError, coupling_strength, load_mode_field
from .parameters import ValidationError, derive_params, params_snapshot, parse_config
from .sensing import SWEEP_AXES, SensingError, sweep, sweep_steady
from .steady_state import (
    SteadyStateError,
    WindowEmptyError,
    measuring_window,
    solve_steady_state,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_UNSTABLE = 4


# --- deterministic serialization -------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, command: str, config_path: str, rows: int,
                    meta: dict) -> None:
    from datetime import datetime, timezone

    inputs = {}
    for ip in [Path(config_path)] + meta.get("inputs", []):
        ip = ip.resolve()
        inputs[str(ip)] = _sha256(ip)
    manifest = {
        "command": command,
        "config": str(Path(config_path).resolve()),
        "output": str(out.resolve()),
        "rows": rows,
        "params": meta.get("params"),
        "input_sha256": inputs,
        "version": __version__,
        "threads": _THREADS_RAW,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(out.with_name(out.name + ".manifest.json"), _json_text(manifest))


# --- config plumbing --------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must be a JSON object")
    return data


def _section(data: dict, name: str, allowed: set[str]) -> dict | None:
    section = data.pop(name, None)
    if section is None:
        return None
    if not isinstance(section, dict):
        raise ValidationError(f"section '{name}' must be an object")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ValidationError(f"section '{name}': unknown keys: {', '.join(unknown)}")
    return section


def _positive_number(section: str, key: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
        raise ValidationError(f"section '{section}': {key} must be a positive number")
    return float(v)


def _sweep_grid(section: dict) -> np.ndarray:
    start = _positive_number("sweep", "start", section.get("start"))
    stop = _positive_number("sweep", "stop", section.get("stop"))
    points = section.get("points")
    if isinstance(points, bool) or not isinstance(points, int) or points < 1:
        raise ValidationError("section 'sweep': points must be a positive integer")
    spacing = section.get("spacing", "log")
    if spacing not in ("log", "linear"):
        raise ValidationError("section 'sweep': spacing must be 'log' or 'linear'")
    if not start < stop and points > 1:
        raise ValidationError("section 'sweep': start must be below stop")
    if spacing == "log":
        return np.logspace(math.log10(start), math.log10(stop), points)
    return np.linspace(start, stop, points)


def _physics(data: dict, config_path: str):
    raw = parse_config(data)
    return derive_params(raw)


# --- subcommands ------------------------------------------------------------

def _window_obj(p) -> dict | None:
    try:
        w = measuring_window(p)
    except WindowEmptyError as exc:
        return {"empty": True, "reason": str(exc)}
    return {"empty": False, "N_min": w.N_min, "N_max": _jsonable(w.N_max),
            "slope": w.slope, "bound": w.bound, "margin": w.margin}


def _cmd_steady(args) -> tuple[list[str], list[list], dict, dict]:
    data = _load_json(args.config)
    sweep_sec = _section(data, "sweep", {"start", "stop", "points", "spacing"})
    p = _physics(data, args.config)
    meta = {"params": params_snapshot(p)}
    header = ["N_m", "Yc", "Xc", "abs_Yc", "Delta_c_eff_hz", "linear_flag"]
    if sweep_sec is not None:
        if p.drive.mode != "population":
            raise ValidationError("a steady sweep needs a population drive mode")
        result = sweep_steady(p, _sweep_grid(sweep_sec))
        rows = [[q.N_m, q.Y_c, q.X_c, q.abs_Yc, angular_to_hz(q.delta_c_eff), q.linear]
                for q in result.points]
        obj = {"command": "steady", "window": _window_obj(p), "rows": [
            {"N_m": q.N_m, "Yc": q.Y_c, "Xc": q.X_c, "abs_Yc": q.abs_Yc,
             "Delta_c_eff_hz": angular_to_hz(q.delta_c_eff), "linear": q.linear}
            for q in result.points]}
        return header, rows, obj, meta
    s = solve_steady_state(p)
    from .steady_state import cavity_quadratures
    X, Y = cavity_quadratures(s)
    linear = abs(s.delta_c_eff) <= 0.1 * p.kappa_c
    rows = [[s.N_m, Y, X, abs(Y), angular_to_hz(s.delta_c_eff), linear]]
    obj = {"command": "steady", "window": _window_obj(p), "rows": [{
        "N_m": s.N_m, "Yc": Y, "Xc": X, "abs_Yc": abs(Y),
        "Delta_c_eff_hz": angular_to_hz(s.delta_c_eff), "linear": linear,
        "N_c": s.N_c, "q_avg": s.q_avg, "Omega": s.Omega,
        "delta_m_eff": s.delta_m_eff, "residual": s.residual,
        "multistable": s.multistable, "all_roots": _jsonable(s.all_roots),
    }]}
    return header, rows, obj, meta


def _cmd_spectrum(args) -> tuple[list[str], list[list], dict, dict]:
    data = _load_json(args.config)
    spec_sec = _section(data, "spectrum",
                        {"omega_min_hz", "omega_max_hz", "points", "refine"}) or {}
    p = _physics(data, args.config)
    meta = {"params": params_snapshot(p)}
    s = solve_steady_state(p)
    linsys = build_linearized(p, s)
    report = stability(linsys)
    if not report.stable:
        raise UnstableSystemError(
            "operating point is unstable; the stationary spectrum does not exist",
            report)

    f_lo = float(spec_sec.get("omega_min_hz", 0.0))
    f_hi = float(spec_sec.get("omega_max_hz", 2.0 * angular_to_hz(p.omega_b)))
    points = spec_sec.get("points", 1201)
    if isinstance(points, bool) or not isinstance(points, int) or points < 2:
        raise ValidationError("section 'spectrum': points must be an integer >= 2")
    if not (0.0 <= f_lo < f_hi):
        raise ValidationError("section 'spectrum': need 0 <= omega_min_hz < omega_max_hz")
    grid = np.linspace(f_lo, f_hi, points)
    if spec_sec.get("refine", True):
        # densify around the mechanical line, which is far narrower than any
        # uniform grid a config will reasonably ask for
        fb, gb = angular_to_hz(p.omega_b), angular_to_hz(p.gamma_b)
        for half, n in ((50.0 * gb, 601), (5.0 * gb, 201)):
            lo, hi = max(f_lo, fb - half), min(f_hi, fb + half)
            if lo < hi:
                grid = np.concatenate([grid, np.linspace(lo, hi, n)])
        grid = np.unique(grid)
    S = nsd_explicit(linsys, TWO_PI * grid, check_stability=False)
    if args.check:
        # dual-method consistency: the closed-form column against one dense
        # resolvent solve per frequency
        worst = 0.0
        for f, v in zip(grid, S):
            ref = nsd_resolvent(linsys, TWO_PI * float(f), check_stability=False)
            worst = max(worst, abs(v - ref) / max(abs(ref), 1e-300))
        if worst > 1e-9:
            raise FluctuationError(
                f"spectrum check failed: explicit and resolvent methods disagree "
                f"by {worst:.3e} relative (limit 1e-9)"
            )
        print(f"magnomech: spectrum check passed, max relative difference "
              f"{worst:.3e} over {grid.size} frequencies", file=sys.stderr)
    rows = [[float(f), float(v)] for f, v in zip(grid, S)]
    obj = {"command": "spectrum",
           "rows": [{"omega_hz": float(f), "S_Yc": float(v)} for f, v in zip(grid, S)]}
    return ["omega_hz", "S_Yc"], rows, obj, meta


def _cmd_sweep(args) -> tuple[list[str], list[list], dict, dict]:
    data = _load_json(args.config)
    sweep_sec = _section(data, "sweep", {"start", "stop", "points", "spacing"})
    if sweep_sec is None:
        raise ValidationError("the sweep command needs a 'sweep' section in the config")
    p = _physics(data, args.config)
    if p.drive.mode != "population":
        raise ValidationError("a sensing sweep needs a population drive mode")
    workers = int(_THREADS_RAW) if _THREADS_RAW else None
    result = sweep(p, args.axis, _sweep_grid(sweep_sec), workers=workers)
    meta = {"params": result.params}
    header = ["N_m", "abs_Yc", "sigma_Y", "snr_db", "stable"]
    rows = [[q.N_m, q.abs_Yc, q.sigma_Y, q.snr_db, q.stable] for q in result.points]
    json_rows = [
        {"N_m": q.N_m, "abs_Yc": q.abs_Yc, "sigma_Y": _jsonable(q.sigma_Y),
         "snr_db": _jsonable(q.snr_db), "stable": q.stable}
        for q in result.points]
    if args.axis != "N_m":
        # the swept quantity gets its own leading column; the population
        # columns keep their places after it
        header = [args.axis] + header
        rows = [[x] + row for x, row in zip(result.grid, rows)]
        json_rows = [{args.axis: x, **jr} for x, jr in zip(result.grid, json_rows)]
    obj = {"command": "sweep", "axis": args.axis, "rows": json_rows}
    return header, rows, obj, meta


def _cmd_coupling(args) -> tuple[list[str], list[list], dict]:
    data = _load_json(args.config)
    mode_sec = data.pop("mode_file", None)
    if mode_sec is None:
        raise ValidationError("the coupling command needs a 'mode_file' entry in the config")
    normalize = False
    if isinstance(mode_sec, dict):
        unknown = sorted(set(mode_sec) - {"path", "normalize"})
        if unknown:
            raise ValidationError(f"mode_file: unknown keys: {', '.join(unknown)}")
        if "path" not in mode_sec:
            raise ValidationError("mode_file: missing 'path'")
        normalize = bool(mode_sec.get("normalize", False))
        mode_path = mode_sec["path"]
    elif isinstance(mode_sec, str):
        mode_path = mode_sec
    else:
        raise ValidationError("mode_file must be a path or an object with 'path'")
    resolved = Path(args.config).parent / mode_path
    mode, material = load_mode_field(resolved)
    g = coupling_strength(mode, material, normalize=normalize)
    # remaining config keys, if any, must form a complete physics payload;
    # they only feed the manifest snapshot
    params = params_snapshot(_physics(data, args.config)) if data else None
    meta = {"params": params,
            "inputs": [Path(resolved), Path(resolved).with_suffix(".json")]}
    header = ["g_mb_rad_s", "g_mb_hz", "V_m3", "d_zpm_m"]
    rows = [[g, angular_to_hz(g), material.V, material.d_zpm]]
    obj = {"command": "coupling", "rows": [{
        "g_mb_rad_s": g, "g_mb_hz": angular_to_hz(g),
        "V_m3": material.V, "d_zpm_m": material.d_zpm,
        "grid": list(mode.chi_x.shape), "normalize": normalize,
    }]}
    return header, rows, obj, meta


def _cmd_stability(args) -> tuple[list[str], list[list], dict, dict]:
    data = _load_json(args.config)
    p = _physics(data, args.config)
    meta = {"params": params_snapshot(p)}
    s = solve_steady_state(p)
    report = stability(build_linearized(p, s))
    header = ["stable", "max_real_part", "routh", "agree"]
    rows = [[report.stable, report.max_real_part,
             report.routh if report.routh is not None else "",
             "" if report.agree is None else report.agree]]
    obj = {"command": "stability", "rows": [{
        "stable": report.stable,
        "max_real_part": report.max_real_part,
        "routh": report.routh,
        "routh_reason": report.routh_reason,
        "agree": report.agree,
        "eigenvalues": [[z.real, z.imag] for z in report.eigenvalues],
    }]}
    return header, rows, obj, meta


_COMMANDS = {
    "steady": _cmd_steady,
    "spectrum": _cmd_spectrum,
    "sweep": _cmd_sweep,
    "coupling": _cmd_coupling,
    "stability": _cmd_stability,
}

_GNUPLOT_AXES = {
    "steady": ("set logscale xy", 1, 4, "N_m", "|Y_c|"),
    "sweep": ("set logscale x", 1, 4, "N_m", "SNR [dB]"),
    "spectrum": ("set logscale y", 1, 2, "omega/2pi [Hz]", "S_Yc"),
    "coupling": ("", 1, 2, "", "g_mb/2pi [Hz]"),
    "stability": ("", 1, 2, "", "max Re(eig)"),
}


def _gnuplot_script(command: str, datafile: Path, axis: str = "N_m") -> str:
    scale, cx, cy, xl, yl = _GNUPLOT_AXES[command]
    if command == "sweep" and axis != "N_m":
        # leading axis column shifts the data columns right by one
        cy += 1
        xl = axis
        if axis == "T":
            scale = ""
    lines = [
        "set datafile separator comma",
        "set grid",
    ]
    if scale:
        lines.append(scale)
    if xl:
        lines.append(f'set xlabel "{xl}"')
    lines.append(f'set ylabel "{yl}"')
    lines.append(
        f'plot "{datafile.name}" skip 1 using {cx}:{cy} with lines title "{command}"'
    )
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="magnomech",
        description="Dispersive optical readout of magnon populations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("steady", "classical operating point or steady sweep"),
        ("spectrum", "phase-quadrature noise spectral density"),
        ("sweep", "sensing sweep: signal, noise, SNR per population"),
        ("coupling", "magnetostrictive coupling rate from a mode file"),
        ("stability", "drift-matrix stability report"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--gnuplot", help="also write a gnuplot script (needs --out)")
        if name == "sweep":
            sp.add_argument("--axis", choices=SWEEP_AXES, default="N_m",
                            help="swept quantity (default N_m)")
        if name == "spectrum":
            sp.add_argument("--check", action="store_true",
                            help="cross-validate against the resolvent method")
    args = parser.parse_args(argv)

    if _THREADS_BAD:
        print(f"magnomech: MAGNOMECH_THREADS={_THREADS_RAW!r} is not a positive integer",
              file=sys.stderr)
        return EXIT_VALIDATION
    if args.gnuplot and not args.out:
        print("magnomech: --gnuplot needs --out (the script references the data file)",
              file=sys.stderr)
        return EXIT_VALIDATION

    try:
        header, rows, obj, meta = _COMMANDS[args.command](args)
    except (ValidationError, ModeFieldError, WindowEmptyError) as exc:
        print(f"magnomech: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UnstableSystemError as exc:
        print(f"magnomech: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (SteadyStateError, FluctuationError, SensingError) as exc:
        print(f"magnomech: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    text = _csv_text(header, rows) if args.format == "csv" else _json_text(obj)
    if args.out:
        out = Path(args.out)
        _atomic_write(out, text)
        _write_manifest(out, args.command, args.config, len(rows), meta)
        if args.gnuplot:
            _atomic_write(Path(args.gnuplot),
                          _gnuplot_script(args.command, out,
                                          getattr(args, "axis", "N_m")))
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
