"""mvset command line front end.

Subcommands: green, family, mvt, converse, blowup, singshift, scenarios.
Configuration is a plain-text ``key = value`` file with ``#`` comments and
sections [grid], [operator], [run]; unknown keys are errors.  All outputs are
deterministic: identical configs produce byte-identical CSV/JSON files.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import mvs, scenarios, singshift
from .elliptic import ChartMetric, CoefficientField, assemble_beltrami, assemble_divergence
from .errors import ConfigError, MvsetError
from .freeboundary import classify
from .grid import ScalarField, make_grid
from .greens import compute_green
from .obstacle import solve_lcp

_GRID_KEYS = {"lo", "hi", "n_side"}
_OP_KEYS = {"scenario", "a11", "a12", "a22", "g11", "g12", "g22"}
_RUN_KEYS = {
    "x0", "r", "radii", "function", "centers", "data", "points",
    "tol_t", "t_lo", "t_hi", "t_count", "out",
}

_FUNCTIONS = {
    "one": lambda x, y: np.ones_like(x),
    "x": lambda x, y: x,
    "xy": lambda x, y: x * y,
    "x2py2": lambda x, y: x * x + y * y,
    "x2": lambda x, y: x * x,
}

_DEFAULTS_HELP = """\
config keys (defaults in parentheses):
  [grid]      lo (-1), hi (1), n_side (257)
  [operator]  scenario (laplace) -- one of the built-ins, see `mvset scenarios`;
              or inline expressions in x, y: a11/a12/a22 (divergence form)
              or g11/g12/g22 (chart metric)
  [run]       x0 ("0 0")          solve center / Green pole
              r (0.4)             single radius
              radii ("0.2 0.3 0.4")
              function (x2py2)    mvt/converse test field: one|x|xy|x2|x2py2
              centers ("0 0")     converse sample centers, comma separated
              data (ridge)        obstacle boundary data: ridge|halfspace
              points ("0 0")      blowup: points to classify, or "fb"
              tol_t (1e-6)        shift-search bisection tolerance
              t_lo/-0.2 t_hi/0.2 t_count/41   uniqueness-scan grid
              out (mvset-out)     output directory (--out overrides)
exit codes: 0 ok, 2 config error, 3 geometry/margin error,
            4 precondition failure, 5 solver failure
"""


def _parse_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as f:
            cp.read_file(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    allowed = {"grid": _GRID_KEYS, "operator": _OP_KEYS, "run": _RUN_KEYS}
    for section in cp.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in allowed[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    return cp


def _get(cp, section, key, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key)
    return default


def _floats(text):
    parts = text.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"cannot parse numbers from '{text}'") from None


def _as_float(text, what):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{what}: cannot parse number from '{text}'") from None


def _as_int(text, what):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: cannot parse integer from '{text}'") from None


def _point(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise ConfigError(f"expected two coordinates, got '{text}'")
    return (vals[0], vals[1])


def _expr_field(grid, expr):
    env = {
        "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
        "sqrt": np.sqrt, "abs": np.abs, "pi": np.pi, "maximum": np.maximum,
        "minimum": np.minimum,
    }
    x, y = grid.coords()
    env["x"] = x
    env["y"] = y
    try:
        vals = eval(expr, {"__builtins__": {}}, env)  # config-supplied formula
    except Exception as e:
        raise ConfigError(f"bad expression '{expr}': {e}") from None
    return ScalarField(grid, np.asarray(vals, dtype=float) * np.ones_like(x))


def _build_grid(cp):
    lo = _as_float(_get(cp, "grid", "lo", "-1"), "grid lo")
    hi = _as_float(_get(cp, "grid", "hi", "1"), "grid hi")
    n_side = _as_int(_get(cp, "grid", "n_side", "257"), "grid n_side")
    return make_grid(lo, hi, n_side)


def _build_operator(cp, grid):
    has = lambda k: cp.has_option("operator", k)
    if has("scenario"):
        if any(has(k) for k in ("a11", "a12", "a22", "g11", "g12", "g22")):
            raise ConfigError("give either a scenario name or inline expressions, not both")
        return scenarios.build_scenario(cp.get("operator", "scenario"), grid)
    if has("a11") or has("a22"):
        c = CoefficientField(
            _expr_field(grid, _get(cp, "operator", "a11", "1")),
            _expr_field(grid, _get(cp, "operator", "a12", "0")),
            _expr_field(grid, _get(cp, "operator", "a22", "1")),
        )
        op = assemble_divergence(c, grid)
        op.meta["scenario"] = "inline-divergence"
        return op
    if has("g11") or has("g22"):
        m = ChartMetric(
            _expr_field(grid, _get(cp, "operator", "g11", "1")),
            _expr_field(grid, _get(cp, "operator", "g12", "0")),
            _expr_field(grid, _get(cp, "operator", "g22", "1")),
        )
        op = assemble_beltrami(m, grid)
        op.meta["scenario"] = "inline-metric"
        return op
    return scenarios.build_scenario("laplace", grid)


def _outdir(cp, args):
    out = args.out or _get(cp, "run", "out", "mvset-out")
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _solution_record(sol):
    rec = {
        "comp_residual": sol.comp_residual,
        "pde_residual": sol.pde_residual,
        "iterations": sol.iterations,
        "active_nodes": sol.active.count,
    }
    rec.update(sol.source)
    return rec


def _solve_data_problem(cp, grid, op):
    name = _get(cp, "run", "data", "ridge")
    try:
        data = scenarios.DATA_PROFILES[name](grid)
    except KeyError:
        raise ConfigError(
            f"unknown data profile '{name}' (choose from {', '.join(scenarios.DATA_PROFILES)})"
        ) from None
    # zero start: grows the iterate from below, so degenerate contact lines
    # (zero slack) keep their exact zeros instead of round-off dust
    sol = solve_lcp(op, -op.rho, bc=data, init="zero",
                    source={"kind": "data", "data": name})
    w = sol.w
    coeff = op.meta.get("coeff")
    if coeff is not None:
        k0 = grid.snap((0.0, 0.0))
        a0 = np.array([
            [coeff.a11.values[k0], coeff.a12.values[k0]],
            [coeff.a12.values[k0], coeff.a22.values[k0]],
        ])
        if np.abs(a0 - np.eye(2)).max() > 1e-12:
            w, _ = singshift.normalize_at_origin(w, a0)
    return sol, w, name


def cmd_green(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    x0 = _point(_get(cp, "run", "x0", "0 0"))
    G = compute_green(op, x0)
    G.field.to_csv(os.path.join(out, "green.csv"))
    G.field.to_pgm(os.path.join(out, "green.pgm"))
    i, j = grid.ij(G.pole)
    _write_json(os.path.join(out, "green.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "pole_ij": [i, j],
        "pole_xy": list(grid.xy(G.pole)),
        "residual": G.residual,
        "min_value": float(G.field.values.min()),
    })
    return 0


def cmd_family(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    x0 = _point(_get(cp, "run", "x0", "0 0"))
    radii = _floats(_get(cp, "run", "radii", "0.2 0.3 0.4"))
    G = compute_green(op, x0)
    fam = mvs.build_family(op, G, radii)
    vol = mvs.volume_identity(fam)
    bb = mvs.ball_bounds(fam)
    entries = []
    for idx, r in enumerate(fam.radii):
        reg = fam.regions[idx]
        entry = {
            "r": r,
            "volume": vol.volumes[idx],
            "vol_rel_err": vol.rel_errors[idx],
            "inradius_ratio": bb.inradius_ratios[idx],
            "circumradius_ratio": bb.circumradius_ratios[idx],
            "gap_to_next": (
                mvs.strict_gap(reg, fam.regions[idx + 1])
                if idx + 1 < len(fam.radii) else None
            ),
        }
        entry.update(_solution_record(fam.solutions[idx]))
        entries.append(entry)
        tag = ("%g" % r).replace(".", "p")
        with open(os.path.join(out, f"polyline_r{tag}.csv"), "w") as f:
            f.write("loop,x,y\n")
            for li, loop in enumerate(reg.loops):
                for px, py in loop:
                    f.write("%d,%.12e,%.12e\n" % (li, px, py))
        fam.solutions[idx].w.to_pgm(os.path.join(out, f"w_r{tag}.pgm"))
    _write_json(os.path.join(out, "family.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "x0": list(grid.xy(fam.center)),
        "nesting_exact": fam.nesting_exact,
        "findings": fam.findings,
        "radii": entries,
    })
    return 0


def _function_field(cp, grid):
    name = _get(cp, "run", "function", "x2py2")
    try:
        fn = _FUNCTIONS[name]
    except KeyError:
        raise ConfigError(
            f"unknown function '{name}' (choose from {', '.join(_FUNCTIONS)})"
        ) from None
    return ScalarField.from_function(grid, fn), name


def cmd_mvt(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    x0 = _point(_get(cp, "run", "x0", "0 0"))
    radii = _floats(_get(cp, "run", "radii", "0.2 0.3 0.4"))
    v, name = _function_field(cp, grid)
    G = compute_green(op, x0)
    fam = mvs.build_family(op, G, radii)
    rep = mvs.verify_mean_value(v, fam, subsolution=True)
    with open(os.path.join(out, "averages.csv"), "w") as f:
        f.write("r,average\n")
        for r, a in zip(fam.radii, rep.averages):
            f.write("%.12e,%.12e\n" % (r, a))
    _write_json(os.path.join(out, "mvt.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "function": name,
        "center_value": rep.center_value,
        "averages": rep.averages,
        "monotone": rep.monotone,
        "max_deviation": rep.max_deviation,
    })
    return 0


def cmd_converse(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    r = _as_float(_get(cp, "run", "r", "0.4"), "run r")
    centers = [
        _point(part) for part in _get(cp, "run", "centers", "0 0").split(",")
    ]
    v, name = _function_field(cp, grid)
    rep = mvs.converse_check(v, op, centers, r)
    with open(os.path.join(out, "residuals.csv"), "w") as f:
        f.write("i,j,x,y,residual\n")
        for k, res in zip(rep.centers, rep.residuals):
            i, j = grid.ij(k)
            x, y = grid.xy(k)
            f.write("%d,%d,%.12e,%.12e,%.12e\n" % (i, j, x, y, res))
    _write_json(os.path.join(out, "converse.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "function": name,
        "r": r,
        "residuals": rep.residuals,
        "stencil_residual": rep.stencil_residual,
    })
    return 0


def cmd_blowup(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    sol, w, data_name = _solve_data_problem(cp, grid, op)
    raw = _get(cp, "run", "points", "0 0")
    if raw.strip() == "fb":
        reg = mvs.extract_regions(sol)
        points = [int(k) for k in reg.fb.indices]
    else:
        points = [grid.snap(_point(part)) for part in raw.split(",")]
    reports = []
    for k in points:
        try:
            reports.append(classify(w, k).summary())
        except MvsetError as e:
            if raw.strip() != "fb":
                raise
            # fb sweep: nodes too close to the boundary lack fitting scales
            reports.append({"point": int(k), "verdict": "unclassifiable",
                            "reason": str(e)})
    _write_json(os.path.join(out, "blowup.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "data": data_name,
        "classifications": reports,
        "solve": _solution_record(sol),
    })
    return 0


def cmd_singshift(args):
    cp = _parse_config(args.config)
    grid = _build_grid(cp)
    op = _build_operator(cp, grid)
    out = _outdir(cp, args)
    tol_T = _as_float(_get(cp, "run", "tol_t", "1e-6"), "run tol_t")
    radii = sorted(_floats(_get(cp, "run", "radii", "0.8 0.4 0.2")), reverse=True)
    sol, w, data_name = _solve_data_problem(cp, grid, op)
    decay = singshift.shift_decay(w, radii, tol_T)
    pres = singshift.preservation_check(w, radii, tol_T, results=decay.results)
    t_lo = _as_float(_get(cp, "run", "t_lo", "-0.2"), "run t_lo")
    t_hi = _as_float(_get(cp, "run", "t_hi", "0.2"), "run t_hi")
    t_count = _as_int(_get(cp, "run", "t_count", "41"), "run t_count")
    scan = singshift.uniqueness_scan(
        w, radii[0], np.linspace(t_lo, t_hi, t_count).tolist()
    )
    with open(os.path.join(out, "shifts.csv"), "w") as f:
        f.write("r,S\n")
        for r, S in decay.pairs:
            f.write("%.12e,%.12e\n" % (r, S))
    with open(os.path.join(out, "scan.csv"), "w") as f:
        f.write("T,status\n")
        for T, st in zip(scan.T_grid, scan.labels()):
            f.write("%.12e,%s\n" % (T, st))
    per_r = []
    for (r, S, status, cls), res in zip(pres.entries, decay.results):
        per_r.append({
            "r": r,
            "S": S,
            "bracket_steps": res.steps,
            "status": status,
            "classification": cls.summary() if cls is not None else None,
        })
    _write_json(os.path.join(out, "singshift.json"), {
        "scenario": op.meta.get("scenario", "custom"),
        "data": data_name,
        "seed_classification": decay.seed.summary(),
        "entries": per_r,
        "envelope_ok": decay.envelope_ok,
        "final_leq_first": decay.final_leq_first,
        "stratum_preserved": pres.preserved,
        "scan_monotone": scan.monotone,
        "scan_single_band": scan.single_band,
        "solve": _solution_record(sol),
    })
    return 0


def cmd_scenarios(args):
    for name, (_, desc) in scenarios.SCENARIOS.items():
        print(f"{name:14s} {desc}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvset",
        description="Numerical laboratory for mean value sets of elliptic operators.",
        epilog=_DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("green", cmd_green, True),
        ("family", cmd_family, True),
        ("mvt", cmd_mvt, True),
        ("converse", cmd_converse, True),
        ("blowup", cmd_blowup, True),
        ("singshift", cmd_singshift, True),
        ("scenarios", cmd_scenarios, False),
    ):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="key = value config file")
            p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except MvsetError as e:
        print(f"mvset: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
