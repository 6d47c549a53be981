"""Command-line front end.

    gaussfrac seminorm --function mode:1 --s 0.5
    gaussfrac isoscan --mass 0.3 --s 0.25 --out results/
    gaussfrac flow --function random:7 --dim 2 --check
    gaussfrac allencahn --degree 16 --check
    gaussfrac extension-dump --function gauss-bump:1 --out results/

Settings come from built-in defaults, then an optional ``--config`` file
of ``key = value`` lines, then the command line (flags win).  Reports go
to stdout as JSON (or CSV with ``--format csv``); ``--out DIR`` also
writes every report into DIR.  Exit codes: 0 ok, 1 property violation,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

COMMANDS = ("seminorm", "isoscan", "flow", "allencahn", "extension-dump")
DEFAULT_GRID = {1: 64, 2: 32, 3: 12}
DEFAULT_YGRID = {1: 400, 2: 120, 3: 60}
SMOOTH_ROUTE_TOL = 1e-3
INDICATOR_ROUTE_TOL = 0.02
FLUX_TOL = 1e-2
AC_ENERGY_TOL = 1e-3
AC_RESIDUAL_TOL = 1e-2

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid configuration; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ options


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ygrid(text: str) -> tuple[int, float | None]:
    """``M`` or ``M,y_max``."""
    parts = str(text).split(",")
    if len(parts) > 2:
        raise ValueError(f"ygrid must be M or M,y_max, got {text!r}")
    M = int(parts[0])
    ymax = float(parts[1]) if len(parts) == 2 else None
    if M < 8 or (ymax is not None and not ymax > 0):
        raise ValueError(f"ygrid needs M >= 8 and y_max > 0, got {text!r}")
    return M, ymax


def _families(text: str) -> tuple[str, ...]:
    return tuple(f.strip() for f in str(text).split(",") if f.strip())


# name: (converter, help); defaults live in DEFAULTS per command
OPTIONS = {
    "s": (float, "fractional order s"),
    "dim": (int, "dimension d"),
    "degree": (int, "degree cap N (Hermite series, random functions)"),
    "mass": (float, "Gaussian mass m"),
    "grid": (int, "Gauss-Hermite nodes per axis"),
    "ygrid": (_ygrid, "extension y-grid: elements M or M,y_max"),
    "seed": (int, "seed for randomised inputs"),
    "out": (str, "directory receiving the report files"),
    "check": (_bool, "exit 1 on any property violation (CI mode)"),
    "format": (str, "stdout format: json or csv"),
    "function": (str, "registry function: mode:k, indicator:c, gauss-bump:a, random:seed"),
    "families": (_families, "comma-separated candidate families"),
    "method": (str, "perimeter route for the scan: semigroup or spectral"),
    "iters": (int, "number of symmetrisation steps"),
    "directions": (str, "flow directions: axes or net"),
    "potential": (str, "potential F: zero, square, double-well[:a]"),
    "restarts": (int, "random restarts"),
}

COMMON = ("s", "dim", "degree", "mass", "grid", "ygrid", "seed", "out", "check", "format")
EXTRA = {
    "seminorm": ("function",),
    "isoscan": ("families", "method"),
    "flow": ("function", "iters", "directions"),
    "allencahn": ("potential", "restarts"),
    "extension-dump": ("function",),
}
DEFAULTS = {
    "seminorm": {"s": 0.5, "dim": 1, "degree": 8, "function": "mode:1"},
    "isoscan": {"s": 0.25, "dim": 2, "mass": 0.5, "families": None, "method": "semigroup"},
    "flow": {"s": 0.25, "dim": 2, "degree": 8, "function": None, "iters": 8, "directions": "axes"},
    "allencahn": {"s": 0.25, "dim": 2, "degree": 16, "mass": 0.0, "potential": "double-well", "restarts": 10},
    "extension-dump": {"s": 0.5, "dim": 1, "degree": 8, "function": "mode:1"},
}
BASE_DEFAULTS = {"seed": 0, "out": None, "check": False, "format": "json", "grid": None, "ygrid": None,
                 "mass": None, "degree": 8}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussfrac", description="Fractional Sobolev experiments on Gaussian space.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=f"run the {cmd} experiment")
        p.add_argument("--config", help="key = value file; command-line flags override it")
        for name in COMMON + EXTRA[cmd]:
            conv, text = OPTIONS[name]
            if name == "check":
                p.add_argument("--check", action="store_const", const=True, default=None, help=text)
            else:
                p.add_argument(f"--{name}", type=conv, default=None, help=text)
    return parser


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then flags."""
    cmd = args.command
    names = COMMON + EXTRA[cmd]
    cfg = dict(BASE_DEFAULTS)
    cfg.update(DEFAULTS[cmd])
    if args.config:
        for key, value in read_config(args.config).items():
            if key not in names:
                raise UsageError(f"unknown config key {key!r} for {cmd}")
            try:
                cfg[key] = OPTIONS[key][0](value)
            except ValueError as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
    for key in names:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = cmd
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    from gaussfrac.registry import parse_function
    from gaussfrac.variational.allen_cahn import parse_potential

    cmd = cfg["command"]
    s = cfg["s"]
    if not (isinstance(s, float) and 0.0 < s < 1.0):
        raise UsageError(f"s must lie in (0, 1), got {s}")
    if cfg["dim"] not in (1, 2, 3):
        raise UsageError(f"dim must be 1, 2 or 3, got {cfg['dim']}")
    if cfg["degree"] is not None and cfg["degree"] < 1:
        raise UsageError("degree must be positive")
    if cfg["grid"] is not None and cfg["grid"] < 2:
        raise UsageError("grid needs at least 2 nodes per axis")
    if cfg["format"] not in ("json", "csv"):
        raise UsageError("format must be json or csv")
    if cfg.get("function"):
        try:
            spec = parse_function(cfg["function"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if spec.family == "mode" and len(spec.arg.split(",")) not in (1, cfg["dim"]):
            raise UsageError(f"mode multi-index {spec.arg!r} does not match dim {cfg['dim']}")
    if cmd == "isoscan":
        if s >= 0.5:
            raise UsageError("isoscan needs s < 1/2 (indicator perimeters diverge otherwise)")
        if cfg["dim"] < 2:
            raise UsageError("isoscan needs dim >= 2")
        if not (cfg["mass"] is not None and 0.0 < cfg["mass"] < 1.0):
            raise UsageError("mass must lie in (0, 1)")
        if cfg["method"] not in ("semigroup", "spectral"):
            raise UsageError("method must be semigroup or spectral")
        from gaussfrac.variational.isoscan import FAMILIES

        bad = [f for f in (cfg["families"] or ()) if f not in FAMILIES]
        if bad:
            raise UsageError(f"unknown families {bad}; choose from {', '.join(FAMILIES)}")
    if cmd == "flow":
        if cfg["iters"] < 0:
            raise UsageError("iters must be nonnegative")
        if cfg["directions"] not in ("axes", "net"):
            raise UsageError("directions must be axes or net")
    if cmd == "allencahn":
        try:
            parse_potential(cfg["potential"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if cfg["restarts"] < 1:
            raise UsageError("restarts must be positive")
        if cfg["mass"] is None or not math.isfinite(cfg["mass"]):
            raise UsageError("mass must be finite")


# ------------------------------------------------------------------ output


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def to_json(obj: dict) -> str:
    """UTF-8 JSON with insertion (stable) key order; non-finite floats as strings."""
    return json.dumps(_plain(obj), indent=2, ensure_ascii=False) + "\n"


def summary_csv(obj: dict) -> str:
    """Two-column CSV (key, value) of the scalar entries of a summary."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for k, v in _plain(obj).items():
        if isinstance(v, (list, dict)):
            v = json.dumps(v)
        writer.writerow([k, repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


def _emit(cfg: dict, summary: dict, files: dict[str, str], stdout_csv: str | None = None) -> None:
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
    text = to_json(summary) if cfg["format"] == "json" else (stdout_csv or summary_csv(summary))
    sys.stdout.write(text)


def _warnings_list(caught) -> list[str]:
    return [f"{w.category.__name__}: {w.message}" for w in caught]


def _grid(cfg: dict):
    from gaussfrac.gauss_core import make_grid

    return make_grid(cfg["dim"], cfg["grid"] or DEFAULT_GRID[cfg["dim"]])


def _ygrid_obj(cfg: dict):
    from gaussfrac.extension import YGrid

    M, ymax = cfg["ygrid"] or (DEFAULT_YGRID[cfg["dim"]], None)
    return YGrid.graded(cfg["s"], M, ymax if ymax is not None else 20.0)


def _convergence_problem(caught) -> bool:
    return any("Convergence" in w.category.__name__ for w in caught)


# ---------------------------------------------------------------- commands


def cmd_seminorm(cfg: dict) -> int:
    from gaussfrac.extension import energy_J1, energy_J2, minimize_extension
    from gaussfrac.ou_spectral import analyze, seminorm_spectral, trace_constant
    from gaussfrac.registry import make_function, parse_function

    spec = parse_function(cfg["function"])
    grid = _grid(cfg)
    yg = _ygrid_obj(cfg)
    s = cfg["s"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f = make_function(spec, grid, cfg["degree"])
        spectral = seminorm_spectral(analyze(f, truncation="tensor"), s)
        v = minimize_extension(f, s, yg)
        J1, J2 = energy_J1(v), energy_J2(v)
        extension = math.sqrt(max(J1 + J2, 0.0))
    gap = abs(extension - spectral) / spectral if spectral > 0 else abs(extension)
    tol = INDICATOR_ROUTE_TOL if spec.is_indicator else SMOOTH_ROUTE_TOL
    ok = gap <= tol and not (cfg["check"] and _convergence_problem(caught))
    summary = {
        "command": "seminorm",
        "function": spec.name,
        "s": s,
        "dim": cfg["dim"],
        "grid": list(grid.shape),
        "ygrid": [yg.size - 1, yg.y_max],
        "d_s": trace_constant(s),
        "spectral": spectral,
        "extension": extension,
        "J1": J1,
        "J2": J2,
        "route_gap": gap,
        "tolerance": tol,
        "extension_iterations": v.info["iterations"],
        "extension_converged": v.info["converged"],
        "warnings": _warnings_list(caught),
        "passed": ok,
    }
    _emit(cfg, summary, {"seminorm.json": to_json(summary), "seminorm.csv": summary_csv(summary)})
    if not ok:
        print(f"route gap {gap:.3e} exceeds {tol:g}" if gap > tol else "extension solver did not converge",
              file=sys.stderr)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_isoscan(cfg: dict) -> int:
    from gaussfrac.variational.isoscan import isoperimetric_scan

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = isoperimetric_scan(cfg["mass"], cfg["s"], cfg["dim"], cfg["families"], method=cfg["method"])
    summary = {"command": "isoscan", **report.as_dict(), "warnings": _warnings_list(caught)}
    _emit(cfg, summary, {"isoscan.json": to_json(summary), "isoscan.csv": report.to_csv()}, report.to_csv())
    for r in report.violations:
        print(f"{r.label}: {r.status} (margin {r.margin:.3e}, tolerance {r.tolerance:.3e})", file=sys.stderr)
    if not report.rotation_ok:
        print(f"halfspace normals disagree by {report.rotation_spread:.3e}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_flow(cfg: dict) -> int:
    from gaussfrac.ehrhard import DirectionSpec, direction_net, symmetrization_flow
    from gaussfrac.registry import make_function, parse_function

    spec = parse_function(cfg["function"] or f"random:{cfg['seed']}")
    grid = _grid(cfg)
    dim = cfg["dim"]
    if cfg["directions"] == "axes":
        dirs = [DirectionSpec.axis(dim, j, sg) for sg in (1, -1) for j in range(dim)]
    else:
        dirs = direction_net(dim)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f = make_function(spec, grid, cfg["degree"])
        _, diag = symmetrization_flow(f, dirs, cfg["iters"], cfg["s"], seed=cfg["seed"])
    semis = diag.seminorms()
    slack = diag.default_slack()
    bad = diag.violations(slack)
    summary = {
        "command": "flow",
        "function": spec.name,
        "s": cfg["s"],
        "dim": dim,
        "grid": list(grid.shape),
        "iters": cfg["iters"],
        "directions": [d.vector for d in dirs],
        "initial_seminorm": float(semis[0]),
        "final_seminorm": float(semis[-1]),
        "final_residual": diag.records[-1].residual,
        "slack": slack,
        "violations": bad,
        "warnings": _warnings_list(caught),
        "passed": not bad,
    }
    csv_text = diag.to_csv()
    _emit(cfg, summary, {"flow.json": to_json(summary), "flow.csv": csv_text}, csv_text)
    for i in bad:
        print(f"step {i}: seminorm rose from {semis[i - 1]:.12g} to {semis[i]:.12g}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_VIOLATION


def cmd_allencahn(cfg: dict) -> int:
    from gaussfrac.variational.allen_cahn import allen_cahn_1d, allen_cahn_nd

    common = dict(F=cfg["potential"], m=cfg["mass"], s=cfg["s"], N=cfg["degree"], restarts=cfg["restarts"],
                  seed=cfg["seed"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r1 = allen_cahn_1d(**common)
        rn = allen_cahn_nd(d=cfg["dim"], **common) if cfg["dim"] >= 2 else None
    summary = {
        "command": "allencahn",
        "potential": cfg["potential"],
        "mass": cfg["mass"],
        "s": cfg["s"],
        "degree": cfg["degree"],
        "restarts": cfg["restarts"],
        "seed": cfg["seed"],
        "energy_1d": r1.energy,
        "seminorm_1d": r1.seminorm,
        "potential_1d": r1.potential_energy,
        "optimality_residual_1d": r1.residual,
        "converged_1d": r1.converged,
        "restart_spread_1d": float(np.ptp(r1.restart_energies)),
    }
    ok = r1.converged
    if rn is not None:
        gap = rn.energy - r1.energy
        summary.update({
            "dim": cfg["dim"],
            "energy_nd": rn.energy,
            "optimality_residual_nd": rn.residual,
            "converged_nd": rn.converged,
            "restart_spread_nd": float(np.ptp(rn.restart_energies)),
            "direction": rn.direction,
            "one_dim_residual": rn.one_dim_residual,
            "energy_gap": gap,
        })
        ok = ok and rn.converged and abs(gap) <= AC_ENERGY_TOL and rn.one_dim_residual <= AC_RESIDUAL_TOL
    summary["warnings"] = _warnings_list(caught)
    summary["passed"] = ok
    profile = r1.profile_csv()
    _emit(cfg, summary, {"allencahn.json": to_json(summary), "allencahn_profile.csv": profile}, profile)
    if cfg["check"] and not ok:
        print("Allen-Cahn check failed: see energy_gap, one_dim_residual and convergence flags", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_extension_dump(cfg: dict) -> int:
    from gaussfrac.extension import energy_J1, energy_J2, minimize_extension, trace_flux
    from gaussfrac.gauss_core import l2_norm
    from gaussfrac.ou_spectral import analyze, frac_laplacian, seminorm_spectral, synthesize, trace_constant
    from gaussfrac.registry import make_function, parse_function

    spec = parse_function(cfg["function"])
    grid = _grid(cfg)
    yg = _ygrid_obj(cfg)
    s = cfg["s"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f = make_function(spec, grid, cfg["degree"])
        c = analyze(f, truncation="tensor")
        spectral = seminorm_spectral(c, s)
        v = minimize_extension(f, s, yg)
        J1, J2 = energy_J1(v), energy_J2(v)
        flux_err = None
        if not spec.is_indicator:
            L = synthesize(frac_laplacian(c, s), grid)
            flux = trace_flux(v)
            denom = l2_norm(L)
            diff = flux.with_values(flux.values - trace_constant(s) * L.values)
            flux_err = l2_norm(diff) / denom if denom > 0 else l2_norm(diff)
    energy = J1 + J2
    gap = abs(math.sqrt(max(energy, 0.0)) - spectral) / spectral if spectral > 0 else math.sqrt(max(energy, 0.0))
    tol = INDICATOR_ROUTE_TOL if spec.is_indicator else SMOOTH_ROUTE_TOL
    ok = gap <= tol and (flux_err is None or flux_err <= FLUX_TOL) and bool(v.info["converged"])
    summary = {
        "command": "extension-dump",
        "function": spec.name,
        "s": s,
        "dim": cfg["dim"],
        "grid": list(grid.shape),
        "ygrid": [yg.size - 1, yg.y_max],
        "energy": energy,
        "J1": J1,
        "J2": J2,
        "spectral_seminorm": spectral,
        "route_gap": gap,
        "flux_error": flux_err,
        "iterations": v.info["iterations"],
        "converged": v.info["converged"],
        "warnings": _warnings_list(caught),
        "passed": ok,
    }
    field_csv = v.to_csv()
    _emit(cfg, summary, {"extension.json": to_json(summary), "extension.csv": field_csv}, field_csv)
    if cfg["check"] and not ok:
        print("extension check failed: see route_gap, flux_error and converged", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


HANDLERS = {
    "seminorm": cmd_seminorm,
    "isoscan": cmd_isoscan,
    "flow": cmd_flow,
    "allencahn": cmd_allencahn,
    "extension-dump": cmd_extension_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
        cfg = resolve(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gaussfrac: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return HANDLERS[cfg["command"]](cfg)


if __name__ == "__main__":
    sys.exit(main())
