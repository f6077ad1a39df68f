"""Command line entry point.

    epcyl <subcommand> --config <path> [--out <dir>] [--threads N]

Subcommands: background, potential, axisym, coercivity, norms, validate,
sweep. Exit codes: 0 success, 2 configuration, 3 regime, 4 convergence,
5 numerical. Every artifact carries the scenario hash, and a
``stamp.json`` records the grid and tolerances of the run.

Heavy modules are imported lazily so thread limits set from ``--threads``
or ``EPCYL_THREADS`` reach the BLAS backends before they load.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import ConfigError, EpcylError, NumericalError, OutOfRegimeError

SUBCOMMANDS = ("background", "potential", "axisym", "coercivity", "norms", "validate", "sweep")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
COORDS = ("x1", "r", "x2", "x3")
VERSION = "0.1.0"

log = logging.getLogger("epcyl")


# ----------------------------------------------------------------- helpers

def _numeric_L(scn, what: str) -> float:
    L = scn.domain["L"]
    if L == "auto":
        raise ConfigError(f"{what} needs a numeric domain.L")
    return float(L)


def _delta_bar(scn):
    from .background import default_delta_bar
    d = scn.domain["delta_bar"]
    return default_delta_bar(scn.params) if d is None else float(d)


def _stamp(out: Path, scn, sub: str, grid: dict, tolerances: dict):
    from ._io import write_json
    write_json(out / "stamp.json", {"scenario": scn.hash, "subcommand": sub, "version": VERSION,
                                    "grid": grid, "tolerances": tolerances})


def field_norms(columns: dict, order: int = 3, names=None) -> dict:
    """Weighted norms of tabulated fields on a tensor grid.

    `columns` holds flattened x1-major samples with coordinates ``x1, r``
    (disk) or ``x1, x2, x3`` (square). Returns per field the C0, H^{k-1},
    H^k_*, W^k_* and M^k_* norms with k = `order`.
    """
    import numpy as np

    from .weighted_norms import GridField, c0_norm, h_star_norm, hk_norm, w_star_norm
    if "x1" not in columns:
        raise ConfigError("field table lacks an x1 column")
    axes = ["x1", "r"] if "r" in columns else ["x1", "x2", "x3"]
    for a in axes:
        if a not in columns:
            raise ConfigError(f"field table lacks a {a} column")
    grids = [np.unique(columns[a]) for a in axes]
    shape = tuple(g.size for g in grids)
    if int(np.prod(shape)) != columns["x1"].size:
        raise ConfigError("field table is not a full tensor grid")
    mesh = np.meshgrid(*grids, indexing="ij")
    for a, m in zip(axes, mesh):
        if not np.array_equal(columns[a], m.ravel()):
            raise ConfigError("field table is not in x1-major tensor order")
    L = float(grids[0][-1] - grids[0][0])
    width = float(grids[1][-1] - grids[1][0])
    cs = "axisym" if len(axes) == 2 else "square"
    names = [n for n in columns if n not in COORDS] if names is None else list(names)
    out = {}
    for n in names:
        if n not in columns:
            raise ConfigError(f"no column {n!r} in field table")
        f = GridField(columns[n].reshape(shape), L, cs, width)
        hs, ws = h_star_norm(f, order), w_star_norm(f, order)
        out[n] = {"C0": c0_norm(f), f"H{order - 1}": hk_norm(f, order - 1),
                  "H_star": hs, "W_star": ws, "M_star": hs + ws}
    return out


# ---------------------------------------------------------------- commands

def run_background(scn, out: Path) -> dict:
    from ._io import write_csv, write_json
    from .background import integrate_background, max_length
    p = scn.params
    db = _delta_bar(scn)
    L = scn.domain["L"]
    if L == "auto":
        L = max_length(p, db).length
    bg = integrate_background(p, float(L), scn.domain["n_steps"], db)
    cols = bg.as_columns()
    write_csv(out / "background.csv", cols, scn.hash)
    flux = float(abs(bg.u * bg.rho / p.J0 - 1.0).max())
    summary = {"scenario": scn.hash, "subcommand": "background", "L": bg.L,
               "n_steps": int(bg.x1.size - 1), "B0": bg.B0, "k0": bg.k0,
               "delta_bar": bg.delta_bar, "rho_s": p.rho_s,
               "rho_min": float(bg.rho.min()), "rho_max": float(bg.rho.max()),
               "mach_min_margin": float(bg.mach.min() - 1.0),
               "invariant_drift": bg.invariant_drift(), "mass_flux_error": flux}
    write_json(out / "summary.json", summary)
    _stamp(out, scn, "background", {"L": bg.L, "n_steps": int(bg.x1.size - 1)},
           {"delta_bar": bg.delta_bar})
    return summary


def _potential_opts(scn):
    from .potential_solver import PicardOptions
    s = scn.solver
    return PicardOptions(tol=s["tol"], max_iters=s["max_iters"], damping=s["damping"],
                         inner_tol=s["inner_tol"], max_sweeps=s["max_sweeps"],
                         norm_order=s["norm_order"], sigma_max=s["sigma_max"],
                         check_band=s["check_bands"])


def _guard(scn, sig: float):
    smax = scn.solver["sigma_max"]
    if smax is not None and sig > smax:
        raise OutOfRegimeError(f"sigma = {sig:.6g} exceeds the guard sigma_max = {smax:.6g}",
                               sigma=sig, sigma_max=smax)


def run_potential(scn, out: Path) -> dict:
    import numpy as np

    from . import spectral_basis as sb
    from ._io import write_csv, write_json
    from .boundary_data import sigma as bd_sigma
    from .potential_solver import (background_grid, collar_report, picard_solve, build_problem,
                                   potential_residuals, primitive_fields)
    p, d = scn.params, scn.domain
    L = _numeric_L(scn, "potential")
    bgg = background_grid(p, L, d["nx1"], min_steps=d["n_steps"])
    boundary = scn.boundary_data(float(bgg.E[-1]))
    sig = bd_sigma(boundary, p, bgg.solution)
    _guard(scn, sig)
    shape = "disk" if d["shape"] == "disk" else "rectangle"
    basis = sb.build(shape, d["n_modes"])
    problem = build_problem(p, L, d["nx1"], boundary, basis, background=bgg.solution)
    opts = _potential_opts(scn)
    state = picard_solve(problem, opts, sigma=sig)
    f, F = state.grid_fields(basis, d["ncross"])
    if f.cross_section == "axisym":
        X1, R = np.meshgrid(f.x1, f.axis_grid(1), indexing="ij")
        cols = {"x1": X1.ravel(), "r": R.ravel()}
    else:
        X1, X2, X3 = np.meshgrid(f.x1, f.axis_grid(1), f.axis_grid(2), indexing="ij")
        cols = {"x1": X1.ravel(), "x2": X2.ravel(), "x3": X3.ravel()}
    cols["psi"], cols["Psi"] = f.values.ravel(), F.values.ravel()
    write_csv(out / "potential_fields.csv", cols, scn.hash)
    prim = primitive_fields(state, problem)
    nq = basis.x2.size
    X1n = np.repeat(problem.x, nq)
    write_csv(out / "potential_nodes.csv",
              {"x1": X1n, "x2": np.tile(basis.x2, problem.x.size),
               "x3": np.tile(basis.x3, problem.x.size), "rho": prim["rho"].ravel(),
               "u1": prim["u"][0].ravel(), "u2": prim["u"][1].ravel(),
               "u3": prim["u"][2].ravel(), "Phi": prim["Phi"].ravel(),
               "mach": prim["mach"].ravel()}, scn.hash,
              comments=("values at the cross-section quadrature nodes",))
    k = scn.solver["norm_order"]
    summary = {"scenario": scn.hash, "subcommand": "potential", "converged": state.converged,
               "iterations": state.iteration, "sigma": sig, "history": state.history,
               "mach_min_margin": float(prim["mach"].min() - 1.0),
               "band": state.diagnostics.get("band"),
               "residuals": potential_residuals(state, problem, d["ncross"]),
               "collar": collar_report(state, problem),
               "mstar_norm": state.mstar(basis, k, d["ncross"]),
               "field_norms": field_norms(cols, k)}
    write_json(out / "summary.json", summary)
    _stamp(out, scn, "potential", {"L": L, "nx1": d["nx1"], "n_modes": d["n_modes"],
                                   "shape": shape, "ncross": d["ncross"]},
           {k2: scn.solver[k2] for k2 in ("tol", "inner_tol", "max_iters", "max_sweeps",
                                          "damping", "sigma_max")})
    return summary


def run_axisym(scn, out: Path) -> dict:
    import numpy as np

    from . import spectral_basis as sb
    from ._io import write_csv, write_json
    from .axisym_solver import (AxisymGrid, AxisymOptions, AxisymSolver, residuals,
                                trace_streamlines)
    from .boundary_data import sigma as bd_sigma
    from .potential_solver import background_grid
    p, d, s = scn.params, scn.domain, scn.solver
    if d["shape"] != "disk":
        raise ConfigError("axisym needs domain.shape = disk")
    L = _numeric_L(scn, "axisym")
    nr = d["nr"] or 4 * d["nx1"]
    bgg = background_grid(p, L, d["nx1"], min_steps=d["n_steps"])
    boundary = scn.boundary_data(float(bgg.E[-1]))
    sig = bd_sigma(boundary, p, bgg.solution)
    _guard(scn, sig)
    grid = AxisymGrid(L, d["nx1"], nr)
    basis = sb.build("disk", d["n_modes"])
    pic = _potential_opts(scn)
    pic.sigma_max = None
    opts = AxisymOptions(outer_tol=s["outer_tol"], max_outer=s["max_outer"], picard=pic,
                         check_bands=s["check_bands"], sigma_max=s["sigma_max"])
    solver = AxisymSolver(p, grid, boundary, basis, opts, background=bgg.solution)
    state, flow = solver.solve(s["initial"], sig)
    cols = flow.columns()
    write_csv(out / "axisym_fields.csv", cols, scn.hash)
    k = s["norm_order"]
    dg = flow.diagnostics
    res = residuals(flow, p)
    h = max(grid.h1, grid.hr)
    summary = {"scenario": scn.hash, "subcommand": "axisym", "sigma": sig,
               "outer_iterations": dg["outer_iterations"], "history": dg["history"],
               "residuals": res, "mach_min_margin": float(flow.mach.min() - 1.0),
               "lower_bounds": flow.lower_bounds(), "violations": dg["violations"],
               "extrema": dg["extrema"], "deviation_norm": state.deviation_norm(p.S0, k),
               "field_norms": field_norms(cols, k)}
    if scn.output["streamlines"]:
        lines = trace_streamlines(flow)
        rows = {"line": [], "x1": [], "r": [], "S": [], "Lambda": []}
        for j, ln in enumerate(lines):
            rows["line"].append(np.full(ln["x1"].size, j, dtype=float))
            for key in ("x1", "r", "S", "Lambda"):
                rows[key].append(ln[key])
        write_csv(out / "streamlines.csv", {key: np.concatenate(v) for key, v in rows.items()},
                  scn.hash, comments=("polylines traced from the entrance",))
        summary["streamlines"] = {"n_lines": len(lines), "h": h,
                                  "max_dS": max(ln["dS"] for ln in lines),
                                  "max_dLambda": max(ln["dLambda"] for ln in lines)}
    write_json(out / "summary.json", summary)
    _stamp(out, scn, "axisym", {"L": L, "nx1": d["nx1"], "nr": nr, "n_modes": d["n_modes"]},
           {k2: s[k2] for k2 in ("outer_tol", "max_outer", "tol", "inner_tol", "sigma_max")})
    return summary


def run_coercivity(scn, out: Path) -> dict:
    from ._io import write_csv, write_json
    from .coercivity import dense_oracle, find_eta, sample_background
    c, p = scn.coercivity, scn.params
    bg, a = sample_background(p, c["a_frak"], scn.domain["n_steps"], scn.domain["delta_bar"])
    eta, mu, rep = find_eta(bg, a, c["L"], refine=c["refine"])
    write_csv(out / "coercivity.csv", rep.columns(), scn.hash)
    summary = {"scenario": scn.hash, "subcommand": "coercivity", "L_star": bg.L}
    summary.update(rep.as_dict())
    if c["oracle"] and rep.passed:
        summary["oracle"] = dense_oracle(p, a, rep.L, eta, mu,
                                         n_steps=10 * scn.domain["n_steps"],
                                         delta_bar=scn.domain["delta_bar"],
                                         base_intervals=rep.x1.size - 1)
    write_json(out / "summary.json", summary)
    _stamp(out, scn, "coercivity", {"L": rep.L, "a_frak": a, "refine": c["refine"],
                                    "n_steps": scn.domain["n_steps"]}, {})
    return summary


def run_norms(scn, out: Path, field: str | None = None) -> dict:
    from ._io import read_csv, write_json
    path = field or scn.norms["field"]
    if not path:
        raise ConfigError("norms needs norms.field or --field")
    fp = Path(path)
    fp = fp if fp.is_absolute() else scn.base_dir / fp
    scen, cols = read_csv(fp)
    k = scn.norms["order"]
    summary = {"scenario": scn.hash, "subcommand": "norms", "source": str(fp),
               "source_scenario": scen, "order": k,
               "field_norms": field_norms(cols, k, scn.norms["columns"])}
    write_json(out / "norms.json", summary)
    _stamp(out, scn, "norms", {}, {})
    return summary


def run_validate(scn, out: Path) -> dict:
    from ._io import write_json
    from .boundary_data import sigma as bd_sigma
    from .boundary_data import validate
    from .potential_solver import background_grid
    p, d = scn.params, scn.domain
    L = _numeric_L(scn, "validate")
    bgg = background_grid(p, L, d["nx1"], min_steps=d["n_steps"])
    boundary = scn.boundary_data(float(bgg.E[-1]))
    rep = validate(boundary, p)
    summary = {"scenario": scn.hash, "subcommand": "validate",
               "sigma": bd_sigma(boundary, p, bgg.solution)}
    summary.update(rep.as_dict())
    summary["failed"] = rep.failed()
    write_json(out / "validation.json", summary)
    _stamp(out, scn, "validate", {"L": L}, {})
    if not rep.ok:
        from .errors import CompatibilityError
        raise CompatibilityError("boundary data fail compatibility: " + ", ".join(rep.failed()))
    return summary


RUNNERS = {"background": run_background, "potential": run_potential, "axisym": run_axisym,
           "coercivity": run_coercivity, "validate": run_validate}


def _sweep_point(args):
    raw, base_dir, sub, out = args
    from .config import parse_config
    import yaml
    try:
        scn = parse_config(yaml.safe_dump(raw, sort_keys=False), base_dir)
        Path(out).mkdir(parents=True, exist_ok=True)
        RUNNERS[sub](scn, Path(out))
        return 0, ""
    except EpcylError as exc:
        return exc.exit_code, str(exc)


def run_sweep(scn, out: Path, threads: int = 1) -> dict:
    from concurrent.futures import ProcessPoolExecutor

    from ._io import write_json
    from .config import set_dotted
    sw = scn.sweep
    if sw is None:
        raise ConfigError("sweep needs a 'sweep' section")
    base = {k: v for k, v in scn.raw.items() if k != "sweep"}
    jobs = [(set_dotted(base, sw["key"], v), scn.base_dir, sw["subcommand"],
             str(out / f"sweep_{i:03d}")) for i, v in enumerate(sw["values"])]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    summary = {"scenario": scn.hash, "subcommand": "sweep", "key": sw["key"],
               "target": sw["subcommand"],
               "points": [{"index": i, "value": v, "dir": f"sweep_{i:03d}", "exit": code,
                           "error": msg} for i, (v, (code, msg)) in
                          enumerate(zip(sw["values"], results))]}
    write_json(out / "sweep.json", summary)
    return summary


# ------------------------------------------------------------------ driver

def _threads(arg) -> int:
    val = arg if arg is not None else os.environ.get("EPCYL_THREADS")
    if val is None:
        return 1
    try:
        n = int(val)
    except (TypeError, ValueError):
        raise ConfigError(f"thread count must be an integer, got {val!r}") from None
    if n < 1:
        raise ConfigError("thread count must be positive")
    return n


def run(subcommand: str, scenario, out=None, threads: int = 1, field: str | None = None) -> dict:
    """Run one subcommand on a parsed scenario; returns the summary dict.

    Raises the typed package errors; `main` maps them to exit codes.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if out is None:
        out = Path(scenario.output["dir"])
        out = out if out.is_absolute() else scenario.base_dir / out
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if subcommand == "norms":
        return run_norms(scenario, out, field)
    if subcommand == "sweep":
        return run_sweep(scenario, out, threads)
    return RUNNERS[subcommand](scenario, out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epcyl", description="Steady supersonic Euler-Poisson "
                                 "flows in cylinders: solvers and verifiers.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario YAML file")
    ap.add_argument("--out", default=None, help="output directory (default: output.dir)")
    ap.add_argument("--threads", default=None, help="worker threads (env EPCYL_THREADS)")
    ap.add_argument("--field", default=None, help="field CSV for the norms subcommand")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = _threads(args.threads)
        for var in THREAD_VARS:
            os.environ.setdefault(var, str(threads))
        from .config import load_config
        scn = load_config(args.config)
        logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)
                            [scn.output["verbosity"]], format="%(levelname)s %(message)s")
        summary = run(args.subcommand, scn, args.out, threads, args.field)
        log.info("%s done, scenario %s", args.subcommand, summary.get("scenario"))
        return 0
    except EpcylError as exc:
        print(f"epcyl: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, _linalg_error()) as exc:
        print(f"epcyl: numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code


def _linalg_error():
    from numpy.linalg import LinAlgError
    return LinAlgError


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
