"""Command-line front end: solve, warmstart, gradcheck, and profile.

Exit codes: 0 success, 1 check failure, 2 solver failure, 3 configuration
error.  Output files go to --out (or $SPA_OUT_DIR, or the working
directory): report.json and trajectory.csv from solve, structure.json and
u_profile.csv from warmstart, derivative_profile.csv from profile.  CSV
files carry a header row, `t` (or `s`) first, values at 17 significant
digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .benchmarks import build_problem
from .exceptions import SwitchOptError, InvalidSwitchOrder, MissingCostate, \
    InfeasiblePolytope, NoStructure
from .gradients import dense_trajectory, evaluate_gradient, \
    free_time_gradient_check
from .odeint import IntegratorSettings
from .optimizer import OptimizeSettings, SolveReport, derivative_profile, \
    minimize, reference_errors, secant_switch
from .problem import SwitchConfig, validate_config
from .warmstart import detect_structure, solve_tv_euler

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3

_FD_DELTA = 1e-6
_GRADCHECK_RTOL = 1e-5
_GRADCHECK_ATOL = 1e-8


def _fmt(x):
    return "%.17g" % float(x)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _out_dir(args):
    out = args.out or os.environ.get("SPA_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_list(text):
    return np.array([float(v) for v in text.split(",")])


def _build(args):
    name = args.problem
    if getattr(args, "case", None) is not None and name == "catalyst1" \
            and args.case == 2:
        name = "catalyst2"
    return build_problem(name, T=args.T)


def _ode_settings(args):
    tol = args.ode_tol
    return IntegratorSettings(rel_tol=tol, abs_tol=tol)


def _initial_config(prob, args):
    if args.s0 is None:
        raise InvalidSwitchOrder(
            "--s0 is required (or use --secant/--warmstart)")
    s0 = _parse_list(args.s0)
    if s0.size != prob.k:
        raise InvalidSwitchOrder(
            f"{prob.name} has {prob.k} switch points, got {s0.size}")
    p0 = _parse_list(args.p0) if args.p0 else None
    if prob.case == 2 and p0 is None:
        raise MissingCostate(f"{prob.name} is a Case-2 problem; supply --p0")
    T0 = args.T if prob.free_time else None
    cfg = SwitchConfig(s=s0, p0=p0,
                       T=T0 or (prob.T if prob.free_time else None))
    validate_config(prob, cfg)
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args):
    out = _out_dir(args)
    prob = _build(args)
    ode = _ode_settings(args)
    opt = OptimizeSettings(stat_tol=args.opt_tol)

    if args.secant:
        if args.bracket is None:
            raise InvalidSwitchOrder("--secant requires --bracket lo,hi")
        lo, hi = _parse_list(args.bracket)
        s_root, iters = secant_switch(prob, (lo, hi), opt, ode)
        cfg = SwitchConfig(s=np.array([s_root]))
        bundle = evaluate_gradient(prob, cfg, ode)
        report = SolveReport(
            final_cfg=cfg, objective=bundle.objective, iterations=iters,
            gradient_evals=iters, converged=True,
            stationarity=float(abs(bundle.d_s[0])),
            worst_margin=float(np.min(bundle.feasibility_margins)),
            reference_errors=reference_errors(prob, cfg, bundle.objective),
            message="secant")
    else:
        if args.warmstart:
            dcp = solve_tv_euler(prob, N=args.N, rho_tv=args.rho_tv)
            est = detect_structure(dcp)
            if est.switch_times.size != prob.k:
                raise NoStructure(
                    f"warm start proposed {est.switch_times.size} switches "
                    f"but {prob.name} has {prob.k}")
            p0 = est.p0_estimate if prob.case == 2 else None
            cfg0 = SwitchConfig(s=est.switch_times, p0=p0,
                                T=prob.T if prob.free_time else None)
        else:
            cfg0 = _initial_config(prob, args)
        report = minimize(prob, cfg0, opt, ode)

    with open(out / "report.json", "w") as fh:
        json.dump({"problem": prob.name, **report.to_dict()}, fh, indent=2)
        fh.write("\n")

    times, xs, us, ps = dense_trajectory(prob, report.final_cfg, ode)
    header = (["t"] + [f"x{i + 1}" for i in range(prob.n)]
              + [f"u{i + 1}" for i in range(prob.m)]
              + [f"p{i + 1}" for i in range(prob.n)])
    _write_csv(out / "trajectory.csv", header,
               np.column_stack([times, xs, us, ps]))

    errs = report.reference_errors
    print(f"{prob.name}: C = {report.objective:.12g} in "
          f"{report.iterations} iterations"
          + (f", max reference error {max(errs.values()):.3g}" if errs else ""))
    return EXIT_OK


def cmd_warmstart(args):
    out = _out_dir(args)
    prob = _build(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dcp = solve_tv_euler(prob, N=args.N, rho_tv=args.rho_tv)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    est = detect_structure(dcp)

    with open(out / "structure.json", "w") as fh:
        json.dump({
            "problem": prob.name,
            "N": dcp.N,
            "rho_tv": dcp.rho_tv,
            "converged": dcp.converged,
            "switch_times": [float(v) for v in est.switch_times],
            "phase_kinds": list(est.phase_kinds),
            "p0_estimate": [float(v) for v in est.p0_estimate],
        }, fh, indent=2)
        fh.write("\n")

    mids = (np.arange(dcp.N) + 0.5) * dcp.h
    header = ["t"] + [f"u{i + 1}" for i in range(prob.m)]
    _write_csv(out / "u_profile.csv", header,
               np.column_stack([mids, dcp.u.T]))
    print(f"{prob.name}: {est.switch_times.size} switches at "
          + ", ".join(f"{v:.6g}" for v in est.switch_times)
          + f"; kinds {est.phase_kinds}")
    return EXIT_OK


def cmd_gradcheck(args):
    prob = _build(args)
    ode = _ode_settings(args)
    cfg = _initial_config(prob, args)
    bundle = evaluate_gradient(prob, cfg, ode, with_d_T=prob.free_time)

    rows = []

    def fd_objective(cq):
        return evaluate_gradient(prob, cq, ode, with_d_T=False).objective

    for j in range(prob.k):
        hi, lo = cfg.copy(), cfg.copy()
        hi.s = cfg.s.copy(); hi.s[j] += _FD_DELTA
        lo.s = cfg.s.copy(); lo.s[j] -= _FD_DELTA
        fd = (fd_objective(hi) - fd_objective(lo)) / (2 * _FD_DELTA)
        rows.append((f"d_s{j + 1}", bundle.d_s[j], fd))
    if prob.case == 2:
        for i in range(prob.n):
            hi, lo = cfg.copy(), cfg.copy()
            hi.p0 = cfg.p0.copy(); hi.p0[i] += _FD_DELTA
            lo.p0 = cfg.p0.copy(); lo.p0[i] -= _FD_DELTA
            fd = (fd_objective(hi) - fd_objective(lo)) / (2 * _FD_DELTA)
            rows.append((f"d_p0{i + 1}", bundle.d_p0[i], fd))
    if prob.free_time:
        analytic, fd = free_time_gradient_check(prob, cfg, ode)
        rows.append(("d_T", analytic, fd))

    ok = True
    print(f"{'derivative':>8} {'analytic':>24} {'finite diff':>24} {'rel err':>12}")
    for name, a, fd in rows:
        err = abs(a - fd) / max(abs(fd), _GRADCHECK_ATOL / _GRADCHECK_RTOL)
        good = err <= _GRADCHECK_RTOL
        ok = ok and good
        print(f"{name:>8} {a:24.16e} {fd:24.16e} {err:12.3e}"
              + ("" if good else "  MISMATCH"))
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_profile(args):
    out = _out_dir(args)
    prob = _build(args)
    ode = _ode_settings(args)
    if args.grid is None:
        raise InvalidSwitchOrder("--grid lo,hi,n is required")
    lo, hi, npts = args.grid.split(",")
    grid = np.linspace(float(lo), float(hi), int(npts))
    rows = derivative_profile(prob, grid, ode_settings=ode)
    _write_csv(out / "derivative_profile.csv", ["s", "dC_ds1"], rows)

    g = rows[:, 1]
    crossings = [float(0.5 * (rows[i, 0] + rows[i + 1, 0]))
                 for i in range(len(g) - 1) if g[i] * g[i + 1] < 0]
    print(f"{prob.name}: {len(crossings)} sign changes"
          + (" near " + ", ".join(f"{c:.6g}" for c in crossings)
             if crossings else ""))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--problem", required=True,
                    help="catalyst1 | catalyst2 | jacobson | bressan | goddard")
    sp.add_argument("--case", type=int, choices=(1, 2), default=None)
    sp.add_argument("--T", type=float, default=None, help="horizon override")
    sp.add_argument("--ode-tol", type=float, default=1e-8)
    sp.add_argument("--opt-tol", type=float, default=1e-8)
    sp.add_argument("--out", default=None, help="output directory "
                    "(default $SPA_OUT_DIR or cwd)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="switchopt",
        description="Switch-point optimal control solver")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="optimize switch points")
    _add_common(sp)
    sp.add_argument("--s0", default=None, help="comma list of switch times")
    sp.add_argument("--p0", default=None, help="comma list, initial costate")
    sp.add_argument("--secant", action="store_true",
                    help="secant iteration (single-switch problems)")
    sp.add_argument("--bracket", default=None, help="lo,hi for --secant")
    sp.add_argument("--warmstart", action="store_true",
                    help="seed s0/p0 from the TV warm start")
    sp.add_argument("--N", type=int, default=100)
    sp.add_argument("--rho-tv", type=float, default=1e-3)
    sp.add_argument("--jobs", type=int, default=1,
                    help="parallel solves when --problem is a comma list")

    sp = sub.add_parser("warmstart", help="TV-regularized structure detection")
    _add_common(sp)
    sp.add_argument("--N", type=int, default=100)
    sp.add_argument("--rho-tv", type=float, default=1e-3)

    sp = sub.add_parser("gradcheck", help="analytic vs finite-difference")
    _add_common(sp)
    sp.add_argument("--s0", default=None)
    sp.add_argument("--p0", default=None)

    sp = sub.add_parser("profile", help="dC/ds1 over a grid (k=1 problems)")
    _add_common(sp)
    sp.add_argument("--grid", default=None, help="lo,hi,npoints")
    return ap


def _run_one(args):
    handler = {
        "solve": cmd_solve,
        "warmstart": cmd_warmstart,
        "gradcheck": cmd_gradcheck,
        "profile": cmd_profile,
    }[args.command]
    return handler(args)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0

    try:
        names = args.problem.split(",")
        if args.command == "solve" and len(names) > 1:
            # independent sweep: one output subdirectory per problem
            jobs = max(1, getattr(args, "jobs", 1))
            base = _out_dir(args)

            def run(name):
                import copy
                a = copy.copy(args)
                a.problem = name
                a.out = str(base / name)
                return _run_one(a)

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                codes = list(pool.map(run, names))
            return max(codes)
        return _run_one(args)
    except (InvalidSwitchOrder, MissingCostate, InfeasiblePolytope,
            KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SwitchOptError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
