"""Experiment runner: parse config, orchestrate probes, emit CSV/JSON, and
print one pass/fail line per declared criterion.

Exit codes: 0 all criteria pass, 1 criterion failure, 2 schema error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config, parse_config_file
from .escape import EscapeLadder, energy_inequality_check, monotonicity_check, verify_transport
from .geometry import KernelPoint
from .model import Box, compose_maps
from .quantize import (NormConvergenceError, ResolutionError, fourier_multiplier,
                       op_h, operator_norm, position_weight)
from .propagate import EnclosureError, EnergyCutoff, evolve, local_decay_probe, propagation_probe
from .recipes import RECIPES, recipe_config, recipe_lines
from .resolvent import (LAPConfig, LAPConvergenceError, SolverBreakdownError,
                        default_epsilon_sequence, free_kernel_1d, ik_probe, lap_solve,
                        one_sided_probe, wf_probe)
from .util import rng

EXIT_OK, EXIT_CRITERION, EXIT_SCHEMA, EXIT_NUMERICAL = 0, 1, 2, 3

NUMERICAL_ERRORS = (LAPConvergenceError, SolverBreakdownError, NormConvergenceError,
                    EnclosureError, ResolutionError, FloatingPointError,
                    np.linalg.LinAlgError)


def _lap_from(cfg: ExperimentConfig, lam: float, sign: int = +1) -> LAPConfig:
    n = cfg.numerics
    return LAPConfig(lam=lam, sign=sign,
                     epsilon_sequence=default_epsilon_sequence(n["eps_k_min"], n["eps_k_max"]),
                     convergence_tol=n["convergence_tol"])


def _criterion(lines, name, passed, detail):
    lines.append((name, bool(passed), detail))


# --------------------------------------------------------------------------
# per-kind runners: return (csv_header, csv_rows, criteria, extras)


def _run_wf(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    model = cfg.model_config()
    kp = KernelPoint(p["x1"], p["xi1"], -p["x2"], p["xi2"])
    res = wf_probe(model, kp, p["lambda"], p["h_list"], p["delta1"], p["delta2"],
                   norm_tol=cfg.numerics["norm_tol"], lap=_lap_from(cfg, p["lambda"]),
                   classify_grid=cfg.numerics["classify_grid"], jobs=jobs, seed=seed)
    crit = []
    want_decay = p["expect"] == "decay"
    _criterion(crit, "classification matches expectation",
               res.decay_expected == want_decay,
               f"classify distances {res.report.distances}")
    if p["criterion_slope"] is not None:
        _criterion(crit, f"fitted slope >= {p['criterion_slope']}",
                   (not res.fit.degenerate) and res.fit.slope >= p["criterion_slope"],
                   f"slope = {res.fit.slope:.3f}")
    if p["criterion_residual"] is not None:
        _criterion(crit, f"max log10 residual <= {p['criterion_residual']}",
                   (not res.fit.degenerate) and res.fit.max_residual <= p["criterion_residual"],
                   f"residual = {res.fit.max_residual:.3f}")
    if p["criterion_max_slope"] is not None:
        _criterion(crit, f"fitted slope <= {p['criterion_max_slope']}",
                   (not res.fit.degenerate) and res.fit.slope <= p["criterion_max_slope"],
                   f"slope = {res.fit.slope:.3f}")
    header = ["h", "epsilon_used", "norm", "iterations", "seconds"]
    rows = [[r.key, r.epsilon or 0.0, r.norm, r.iterations, r.seconds] for r in res.rows]
    extras = {"fit": {"slope": res.fit.slope, "intercept": res.fit.intercept,
                      "max_residual": res.fit.max_residual},
              "box_radius": res.box_radius,
              "distances": res.report.distances}
    return header, rows, crit, extras


def _run_ik(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    res = ik_probe(cfg.model_config(), p["lambda"], p["gamma_minus"], p["gamma_plus"],
                   p["weight_n"], p["l_list"], norm_tol=cfg.numerics["norm_tol"],
                   lap=_lap_from(cfg, p["lambda"]), jobs=jobs, seed=seed)
    crit = []
    _criterion(crit, f"norms bounded within factor {p['criterion_factor']} across L",
               res.bound_factor <= p["criterion_factor"],
               f"max/min = {res.bound_factor:.3f}")
    header = ["L", "epsilon_used", "norm", "iterations", "seconds"]
    rows = [[r.key, r.epsilon or 0.0, r.norm, r.iterations, r.seconds] for r in res.rows]
    extras = {"bound_factor": res.bound_factor, "control_norm": res.control_norm}
    return header, rows, crit, extras


def _run_one_sided(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    res = one_sided_probe(cfg.model_config(), p["lambda"], p["sign"], p["gamma"],
                          p["nu"], p["s"], p["l_list"], norm_tol=cfg.numerics["norm_tol"],
                          lap=_lap_from(cfg, p["lambda"], sign=p["sign"]),
                          jobs=jobs, seed=seed)
    crit = []
    _criterion(crit, f"norms bounded within factor {p['criterion_factor']} across L",
               res.bound_factor <= p["criterion_factor"],
               f"max/min = {res.bound_factor:.3f}")
    header = ["L", "epsilon_used", "norm", "iterations", "seconds"]
    rows = [[r.key, r.epsilon or 0.0, r.norm, r.iterations, r.seconds] for r in res.rows]
    return header, rows, crit, {"bound_factor": res.bound_factor}


def _run_local_decay(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    model = cfg.model_config()
    cutoff = EnergyCutoff(lam=p["lambda"], eps_f=p["eps_f"])
    tg = np.geomspace(p["t_min"], p["t_max"], p["n_t"])
    res = local_decay_probe(model, cutoff, p["nu"], tg,
                            box_radius=cfg.model["box_radius"] or 512,
                            norm_tol=cfg.numerics["norm_tol"], seed=seed)
    crit = []
    if p["criterion_kappa"] is not None:
        _criterion(crit, f"fitted kappa >= {p['criterion_kappa']}",
                   np.isfinite(res.kappa_hat) and res.kappa_hat >= p["criterion_kappa"],
                   f"kappa_hat = {res.kappa_hat:.3f}")
    header = ["h", "t", "norm", "chebyshev_terms", "seconds"]
    rows = [[r["h"], r["t"], r["norm"], r["chebyshev_terms"], r["seconds"]]
            for r in res.rows]
    return header, rows, crit, {"kappa_hat": res.kappa_hat}


def _run_prop31(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    model = cfg.model_config()
    kp = KernelPoint(p["x1"], p["xi1"], -p["x2"], p["xi2"])
    cutoff = EnergyCutoff(lam=p["lambda"], eps_f=p["eps_f"])
    res = propagation_probe(model, kp, p["lambda"], p["h_list"],
                            delta1=p["delta1"], delta2=p["delta2"], cutoff=cutoff,
                            mode=p["expect"], classify_grid=cfg.numerics["classify_grid"],
                            norm_tol=cfg.numerics["norm_tol"], jobs=jobs, seed=seed)
    crit = []
    if p["criterion_slope"] is not None:
        _criterion(crit, f"sup-norm slope >= {p['criterion_slope']}",
                   (not res.fit.degenerate) and res.fit.slope >= p["criterion_slope"],
                   f"slope = {res.fit.slope:.3f}")
    if p["criterion_max_slope"] is not None:
        _criterion(crit, f"sup-norm slope <= {p['criterion_max_slope']}",
                   (not res.fit.degenerate) and res.fit.slope <= p["criterion_max_slope"],
                   f"slope = {res.fit.slope:.3f}")
    header = ["h", "t", "norm", "chebyshev_terms", "seconds"]
    rows = [[r["h"], r["t"], r["norm"], r["chebyshev_terms"], r["seconds"]]
            for r in res.rows]
    return header, rows, crit, {"fit": {"slope": res.fit.slope,
                                        "max_residual": res.fit.max_residual},
                                "sup_norms": {str(k): v for k, v in res.sup_norms.items()}}


def _run_escape(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    model = cfg.model_config()
    ladder = EscapeLadder(stencil=model.stencil, x2=p["x2"], xi2=p["xi2"],
                          delta1=p["delta1"], delta2=p["delta2"], h=p["h"],
                          depth=p["depth"], mu=p["mu"])
    crit = []
    for j in range(0, p["depth"] + 1):
        rep = verify_transport(ladder, j)
        _criterion(crit, f"transport inequality j={j} (min >= -1e-12)", rep.passed,
                   f"min = {rep.min_value:.2e} at {rep.argmin}")
    bad = dataclasses.replace(ladder, delta2=2.0, validate=False)
    rep_bad = verify_transport(bad, 0)
    _criterion(crit, "negative control (oversized delta2) fails", rep_bad.min_value < -1e-6,
               f"min = {rep_bad.min_value:.2e}")
    base = dataclasses.replace(ladder, depth=0, gammas=(), C_list=None)
    energy = energy_inequality_check(model, base, p["t_samples"], p["n_target"],
                                     h_list=p["h_list"], box_radius=p["box_radius"])
    if p["criterion_exponent"] is not None:
        _criterion(crit, f"energy-inequality exponent >= {p['criterion_exponent']}",
                   energy.exponent >= p["criterion_exponent"],
                   f"exponent = {energy.exponent:.2f}")
    mono = monotonicity_check(model, base, p["mono_t_list"], energy_report=energy,
                              box_radius=p["mono_box_radius"])
    _criterion(crit, "monotonicity margins respect the fitted bound", mono.passed,
               f"margins = { {str(t): f'{m:.2e}' for t, m in mono.margins.items()} }")
    header = ["h", "t", "lambda_min", "margin"]
    rows = [[r["h"], r["t"], r["lambda_min"], r["margin"]] for r in energy.rows()]
    extras = {"energy_exponent": energy.exponent, "energy_amplitude": energy.amplitude,
              "monotonicity_margins": {str(t): m for t, m in mono.margins.items()}}
    return header, rows, crit, extras


def _run_free_kernel(cfg: ExperimentConfig, jobs, seed):
    p = cfg.probe
    if cfg.model["potential"] != "none":
        raise ConfigError("free-kernel probe requires potential = none")
    model = cfg.model_config()
    lam = p["lambda"]
    L = p["box_radius"]
    H = model.assemble(L, with_cap=True)
    rhs = np.zeros(H.dim, dtype=complex)
    rhs[H.box.index_of([0])] = 1.0
    t0 = time.perf_counter()
    u, info = lap_solve(H, _lap_from(cfg, lam), rhs, return_info=True)
    secs = time.perf_counter() - t0
    n = H.box.sites()[:, 0]
    inner = np.abs(n) <= int(p["inner_frac"] * L)
    exact = np.array([free_kernel_1d(lam, +1, k) for k in n[inner]])
    rel = float(np.linalg.norm(u[inner] - exact) / np.linalg.norm(exact))
    crit = []
    _criterion(crit, f"free kernel relative error <= {p['criterion_rel_error']}",
               rel <= p["criterion_rel_error"], f"rel err = {rel:.2e}")
    header = ["L", "epsilon_used", "norm", "iterations", "seconds"]
    rows = [[L, info["epsilon"], rel, len(info["diffs"]), secs]]
    return header, rows, crit, {"rel_error": rel, "epsilon": info["epsilon"]}


def _run_calculus(cfg: ExperimentConfig, jobs, seed):
    lam = cfg.probe["lambda"]
    model = cfg.model_config()
    box = Box(1, 64)
    g = rng(seed)
    u = g.standard_normal(box.site_count) + 1j * g.standard_normal(box.site_count)
    crit = []
    rows = []

    def check(name, value, tol):
        _criterion(crit, name, value <= tol, f"value = {value:.2e} (tol {tol:g})")
        rows.append([name, value, tol, int(value <= tol)])

    ident = fourier_multiplier(lambda xi: np.ones_like(np.asarray(xi)), box)
    check("unit multiplier is the identity", float(np.linalg.norm(ident(u) - u)
                                                   / np.linalg.norm(u)), 1e-13)
    shift = fourier_multiplier(lambda xi: np.exp(1j * np.asarray(xi)), box)
    check("e^{i xi} multiplier is the +n cyclic shift",
          float(np.linalg.norm(shift(u) - np.roll(u, -1)) / np.linalg.norm(u)), 1e-12)
    wplus = position_weight(1.5, box)
    wminus = position_weight(-1.5, box)
    check("position weights invert", float(np.linalg.norm(wplus(wminus(u)) - u)
                                           / np.linalg.norm(u)), 1e-13)
    H = model.assemble(48, with_cap=True)
    eps1, eps2 = 1e-2, 2e-2
    from .resolvent import _ShiftedSolver
    s1 = _ShiftedSolver(H, lam, +1, eps1, "banded-direct")
    s2 = _ShiftedSolver(H, lam, +1, eps2, "banded-direct")
    v = g.standard_normal(H.dim) + 1j * g.standard_normal(H.dim)
    lhs = s1.solve(v) - s2.solve(v)
    rhs = (1j * eps1 - 1j * eps2) * s1.solve(s2.solve(v))
    check("resolvent identity", float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs)), 1e-8)
    Hh = model.assemble(48, with_cap=False)
    w = g.standard_normal(Hh.dim) + 1j * g.standard_normal(Hh.dim)
    ev = evolve(Hh, w, 3.0)
    check("unitarity of evolve", float(abs(np.linalg.norm(ev) - np.linalg.norm(w))
                                       / np.linalg.norm(w)), 1e-10)
    ev2 = evolve(Hh, evolve(Hh, w, 1.25), 1.75)
    check("group law", float(np.linalg.norm(ev2 - ev) / np.linalg.norm(w)), 1e-9)
    header = ["check", "value", "tol", "passed"]
    return header, rows, crit, {}


_RUNNERS = {
    "wf": _run_wf,
    "ik": _run_ik,
    "one-sided": _run_one_sided,
    "local-decay": _run_local_decay,
    "prop31": _run_prop31,
    "escape": _run_escape,
    "free-kernel": _run_free_kernel,
    "calculus": _run_calculus,
}


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def run(cfg: ExperimentConfig, out_dir=None, jobs: int = 1, seed=None, quiet=False):
    """Execute the probe; write results.csv + manifest.json; return exit code."""
    out = Path(out_dir if out_dir is not None else cfg.output["directory"])
    seed = cfg.numerics["seed"] if seed is None else int(seed)
    try:
        header, rows, criteria, extras = _RUNNERS[cfg.probe_kind](cfg, jobs, seed)
    except ConfigError:
        raise
    except NUMERICAL_ERRORS as exc:
        if not quiet:
            print(f"NUMERICAL ERROR: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # parameter/hypothesis violations surfaced by the probes
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    formats = [f.strip() for f in cfg.output["formats"].split(",") if f.strip()]
    if "csv" in formats:
        with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    if "json" in formats:
        manifest = {
            "config": cfg.resolved(),
            "seed": seed,
            "jobs": jobs,
            "versions": {"latscat": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__},
            "results": extras,
            "criteria": [{"name": n, "passed": ok, "detail": d} for n, ok, d in criteria],
        }
        with open(out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    all_ok = True
    for name, ok, detail in criteria:
        all_ok &= ok
        if not quiet:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
    if not criteria and not quiet:
        print("no criteria declared; probe artifacts written")
    return EXIT_OK if all_ok else EXIT_CRITERION


def list_recipes(stream=None):
    stream = stream or sys.stdout
    for line in recipe_lines():
        print(line, file=stream)
    print(f"{len(RECIPES)} recipes", file=stream)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="latscat",
                                 description="lattice resolvent microstructure lab")
    sub = ap.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("config", nargs="?", help="path to an INI config")
    runp.add_argument("--recipe", help="run a canned recipe instead of a file")
    runp.add_argument("--jobs", type=int, default=1, help="probe-level parallelism")
    runp.add_argument("--out", default=None, help="output directory override")
    runp.add_argument("--seed", type=int, default=None, help="seed override")
    sub.add_parser("list-recipes", help="print the canned recipe index")
    showp = sub.add_parser("show-recipe", help="print a canned recipe config")
    showp.add_argument("name")
    args = ap.parse_args(argv)
    if args.command == "list-recipes":
        list_recipes()
        return EXIT_OK
    if args.command == "show-recipe":
        try:
            print(recipe_config(args.name))
        except KeyError as exc:
            print(exc, file=sys.stderr)
            return EXIT_SCHEMA
        return EXIT_OK
    try:
        if args.recipe:
            cfg = parse_config(recipe_config(args.recipe))
        elif args.config:
            cfg = parse_config_file(args.config)
        else:
            raise ConfigError("run needs a config path or --recipe")
        return run(cfg, out_dir=args.out, jobs=args.jobs, seed=args.seed)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"CONFIG ERROR: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
