"""
cli.py

Command-line front end:
1. eig           first eigenvalue lambda_1 = min Psi~ and its eigenfunction
2. trace         energy curve c -> lambda_{c,1} over a sweep
3. solve         solution with prescribed lambda, via the curve crossing
4. verify        residual report for a state file
5. print-config  effective configuration as TOML

Exit codes: 0 ok, 1 configuration, input or numerical-library error, 2
convergence failure or rejected solution, 3 certified nonexistence.

Result summaries (and the JSON of verify and the TOML of print-config) go to
stdout; progress and diagnostics go to the log on stderr.
"""

import argparse
import dataclasses
import logging
import pathlib
import sys

import numpy as np

import nehari.config as conf
import nehari.core as core
import nehari.curves as crv
import nehari.io as nio
import nehari.optimizer as opt
import nehari.stats as st
from nehari.core import SignCase
from nehari.dirichlet import DirichletProblem, rayleigh_lambda1
from nehari.errors import ConfigError, GridMismatch, NehariError, NoConvergence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CONVERGENCE = 2
EXIT_NONEXISTENCE = 3

MAX_FAILED_FRACTION = 0.2


def _output_dir(cfg: conf.RunConfig) -> pathlib.Path:
    out = pathlib.Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_record(cfg: conf.RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def _lambda1(p: core.ScaledProblem, cfg: conf.RunConfig) -> opt.MinimizeReport:
    print("  Computing lambda_1 = min Psi~ ...")
    return opt.minimize_psi(p, cfg.solver)


def cmd_eig(cfg: conf.RunConfig) -> int:
    conf.validate(cfg)
    p = conf.build_problem(cfg)
    out = _output_dir(cfg)
    print(f"Eigenvalue run: {p.describe()['model']} with {p.size} nodes, {cfg.solver.restarts} restarts")

    try:
        rep = opt.minimize_psi(p, cfg.solver)
    except NoConvergence as exc:
        print(f"Error: {exc}", file=sys.stderr)
        if exc.report is not None:
            nio.write_json(out / "lambda1.json", {**exc.report.to_dict(), "problem": p.describe()})
        return EXIT_CONVERGENCE

    restart_stats = st.calculate_stats(list(rep.restart_values))
    result = {
        "value": rep.value,
        "grad_norm": rep.grad_norm,
        "restarts": rep.restarts_used,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "restart_stats": restart_stats,
        "agreeing_fraction": st.agreeing_fraction(list(rep.restart_values), rep.value),
        "problem": p.describe(),
        "fingerprint": crv.problem_fingerprint(p),
    }
    if isinstance(p, DirichletProblem):
        oracle, _ = rayleigh_lambda1(p)
        result["oracle"] = oracle
    nio.write_json(out / "lambda1.json", result)
    nio.write_state_csv(out / "eigenfunction.csv", p.coordinates, rep.minimizer, p.coordinate_name)

    print("\n--- Summary ---")
    print(f"lambda_1:   {rep.value:.12g}")
    print(f"grad_norm:  {rep.grad_norm:.3e}")
    print(f"restarts:   spread={restart_stats['spread']:.3e} agreeing={result['agreeing_fraction']:.2f}")
    if "oracle" in result:
        print(f"oracle:     {result['oracle']:.12g}")
    print(f"Results saved to {out}")
    return EXIT_OK


def _trace(p, cfg: conf.RunConfig, lambda1: float | None) -> crv.Curve:
    c_grid = conf.energy_grid(cfg.sweep)
    print(f"  Tracing {len(c_grid)} energies in [{c_grid[0]:g}, {c_grid[-1]:g}] ...")
    curve = crv.trace_curve(p, c_grid, cfg.solver, boundary_eps=cfg.sweep.boundary_eps)
    curve.lambda1 = lambda1
    return curve


def _curve_record(cfg: conf.RunConfig, curve: crv.Curve) -> dict:
    record = curve.to_dict()
    record["config"] = _config_record(cfg)
    record["failed_fraction"] = curve.failed_fraction
    record["slope_ratios"] = crv.slope_consistency(curve)
    if curve.lambda1 is not None:
        limits = core.predicted_limits(curve.case, curve.lambda1)
        record["predicted_limits"] = {"lower_c": limits.at_lower, "upper_c": limits.at_upper}
        atol = cfg.tolerances.energy * (1.0 + abs(curve.lambda1))
        record["ordering_violations"] = crv.ordering_violations(curve, curve.lambda1, atol)
    return record


def cmd_trace(cfg: conf.RunConfig) -> int:
    conf.validate(cfg, need_case=True, need_sweep=True)
    p = conf.build_problem(cfg)
    out = _output_dir(cfg)
    print(f"Curve trace: {p.describe()['model']} case {p.case.value}")

    try:
        lambda1 = _lambda1(p, cfg).value
    except NoConvergence as exc:
        logger.warning("lambda_1 unavailable, curve is not annotated: %s", exc)
        lambda1 = None

    curve = _trace(p, cfg, lambda1)
    nio.write_curve_csv(out / "curve.csv", curve)
    nio.write_json(out / "curve.json", _curve_record(cfg, curve))
    if cfg.output.plot:
        nio.plot_curve_svg(out / "curve.svg", [(f"case {curve.case.value}", curve)], lambda1=lambda1,
                           lambda_target=cfg.command.lambda_target, title=f"Energy curve, case {curve.case.value}")

    ok = curve.ok_points
    print("\n--- Summary ---")
    print(f"points:     {len(ok)}/{len(curve.points)} converged")
    if ok:
        print(f"lambda:     {ok[0].lambda_:.10g} (c={ok[0].c:g}) .. {ok[-1].lambda_:.10g} (c={ok[-1].c:g})")
    if lambda1 is not None:
        print(f"lambda_1:   {lambda1:.10g}")
    print(f"monotone:   {'yes' if not curve.violations else f'{len(curve.violations)} violations'}")
    print(f"Results saved to {out}")

    if curve.failed_fraction > MAX_FAILED_FRACTION:
        print(f"Error: {curve.failed_fraction:.0%} of the curve points failed", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_solve(cfg: conf.RunConfig) -> int:
    conf.validate(cfg, need_case=True)
    target = cfg.command.lambda_target
    if target is None:
        raise ConfigError("solve needs command.lambda_target (or --lambda-target)")
    p = conf.build_problem(cfg)
    out = _output_dir(cfg)
    print(f"Prescribed-lambda solve: {p.describe()['model']} case {p.case.value}, lambda={target:g}")

    lambda1 = _lambda1(p, cfg).value
    if p.case in (SignCase.II, SignCase.IV) and target <= lambda1:
        reason = (f"case {p.case.value}: lambda_{{c,1}} >= lambda_1 = {lambda1:.10g} for every c, "
                  f"so lambda = {target:g} <= lambda_1 admits no nontrivial solution")
        nio.write_json(out / "solution.json", {
            "nonexistence": True,
            "reason": reason,
            "lambda_target": target,
            "lambda1": lambda1,
            "problem": p.describe(),
        })
        print(f"Certified nonexistence: {reason}")
        return EXIT_NONEXISTENCE

    conf.validate(cfg, need_case=True, need_sweep=True)
    curve = _trace(p, cfg, lambda1)
    found = crv.intersect_with_lambda(p, curve, target, cfg.solver)
    if cfg.output.plot:
        nio.plot_curve_svg(out / "curve.svg", [(f"case {curve.case.value}", curve)], lambda1=lambda1,
                           lambda_target=target, title=f"Energy curve, case {curve.case.value}")
    if found is None:
        print(f"Error: the curve does not cross lambda={target:g} on the configured sweep", file=sys.stderr)
        nio.write_json(out / "solution.json", {
            "nonexistence": False,
            "crossing": None,
            "lambda_target": target,
            "lambda1": lambda1,
            "curve": curve.to_dict(),
        })
        return EXIT_CONVERGENCE

    report = opt.verify_solution(p, found.state, target, found.c_star, cfg.tolerances)
    nio.write_state_csv(out / "solution.csv", p.coordinates, found.state, p.coordinate_name)
    nio.write_json(out / "solution.json", {
        **report.to_dict(),
        "c_star": found.c_star,
        "lambda_curve": found.point.lambda_,
        "lambda1": lambda1,
        "chain_holds": report.chain_holds,
        "fingerprint": curve.fingerprint,
        "problem": p.describe(),
    })

    print("\n--- Summary ---")
    print(f"c*:         {found.c_star:.15g}")
    print(f"lambda:     {found.point.lambda_:.12g} (target {target:g})")
    for name, value in report.to_dict()["residuals"].items():
        print(f"{name + ':':<12}{value:.3e}")
    print(f"accepted:   {report.accepted} {report.flags if report.flags else ''}")
    print(f"Results saved to {out}")
    return EXIT_OK if report.accepted else EXIT_CONVERGENCE


def cmd_verify(cfg: conf.RunConfig) -> int:
    conf.validate(cfg)
    cmd = cfg.command
    if cmd.state_file is None or cmd.lambda_ is None or cmd.c is None:
        raise ConfigError("verify needs a state file, lambda and c")
    p = conf.build_problem(cfg)
    column, coords, values = nio.read_state_csv(cmd.state_file)
    if column != p.coordinate_name:
        raise GridMismatch(f"State file uses '{column}' coordinates, the {p.describe()['model']} grid uses "
                           f"'{p.coordinate_name}'")
    if coords.shape != p.coordinates.shape or not np.allclose(coords, p.coordinates, rtol=1e-12, atol=0.0):
        raise GridMismatch(f"State file grid ({coords.size} nodes) does not match the configured grid "
                           f"({p.size} nodes)")

    report = opt.verify_solution(p, values, cmd.lambda_, cmd.c, cfg.tolerances)
    sys.stdout.write(nio.dumps_json({**report.to_dict(), "chain_holds": report.chain_holds}))
    return EXIT_OK if report.accepted else EXIT_CONVERGENCE


def cmd_print_config(cfg: conf.RunConfig) -> int:
    sys.stdout.write(conf.dump_toml(cfg))
    return EXIT_OK


COMMANDS = {
    "eig": cmd_eig,
    "trace": cmd_trace,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "print-config": cmd_print_config,
}


def _flag_overrides(args) -> dict:
    """Explicit flags as a nested override dict (unset flags are skipped)."""
    table = {
        "model": ("problem", "model"),
        "seed": ("solver", "rng_seed"),
        "restarts": ("solver", "restarts"),
        "workers": ("solver", "workers"),
        "output": ("output", "directory"),
        "c_min": ("sweep", "c_min"),
        "c_max": ("sweep", "c_max"),
        "count": ("sweep", "count"),
        "spacing": ("sweep", "spacing"),
        "lambda_target": ("command", "lambda_target"),
        "state": ("command", "state_file"),
        "lam": ("command", "lambda"),
        "c": ("command", "c"),
    }
    overrides = {}
    for dest, (section, key) in table.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if getattr(args, "no_plot", False):
        overrides.setdefault("output", {})["plot"] = False
    return overrides


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="Override one configuration value (repeatable)")
    common.add_argument("--model", choices=conf.MODELS, default=None, help="Problem instantiation")
    common.add_argument("--seed", type=int, default=None, help="Random seed for restarts")
    common.add_argument("--restarts", type=int, default=None, help="Number of random restarts")
    common.add_argument("--workers", type=int, default=None, help="Parallel restart workers")
    common.add_argument("--output", default=None, help="Output directory (default: results)")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--c-min", type=float, default=None, help="Lower end of the energy sweep")
    sweep.add_argument("--c-max", type=float, default=None, help="Upper end of the energy sweep")
    sweep.add_argument("--count", type=int, default=None, help="Number of sweep energies")
    sweep.add_argument("--spacing", choices=conf.SPACINGS, default=None, help="Sweep spacing")
    sweep.add_argument("--lambda-target", type=float, default=None, help="Prescribed lambda")
    sweep.add_argument("--no-plot", action="store_true", help="Do not write curve.svg")

    parser = argparse.ArgumentParser(prog="nehari", description="Scaled Nehari manifold solver CLI")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eig", parents=[common], help="First eigenvalue lambda_1")
    sub.add_parser("trace", parents=[common, sweep], help="Trace the energy curve c -> lambda_{c,1}")
    sub.add_parser("solve", parents=[common, sweep], help="Solve with prescribed lambda")
    verify = sub.add_parser("verify", parents=[common], help="Residual report for a state file")
    verify.add_argument("--state", default=None, help="State CSV (r,u or x,u)")
    verify.add_argument("--lambda", dest="lam", type=float, default=None, help="Eigenvalue parameter")
    verify.add_argument("--c", type=float, default=None, help="Prescribed energy")
    sub.add_parser("print-config", parents=[common], help="Print the effective configuration as TOML")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        cfg = conf.load_config(args.config, [_flag_overrides(args), *args.overrides])
        return COMMANDS[args.command](cfg)
    except NoConvergence as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NehariError, ValueError, FileNotFoundError) as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, ArithmeticError, OSError) as exc:
        logger.error("Numerical or I/O failure in %s: %s: %s", args.command, type(exc).__name__, exc)
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
