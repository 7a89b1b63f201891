"""``burgers-stab`` command-line front end.

Subcommands::

    verify      run the numerical self-checks
    run         run all levels of a config and write the convergence table
    care        solve the Riccati equation at one level and write P and S
    steady      solve the steady problem by Picard iteration
    mesh-dump   print the triangulation of one level

Exit codes: 0 success, 2 configuration error, 3 numerical or convergence
error, 4 failed property check.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from . import field_expr as fe
from .checks import default_suite
from .config import dump_config, load_config
from .configs import bundled_path
from .convergence import run_experiment
from .errors import (ArgumentError, ConfigurationError, EvaluationError,
                     ExprSyntaxError, NumericalError)
from .fem import assemble_static, load_vector, write_matrix_market
from .mesh import build_uniform_mesh, dump_mesh, interpolate
from .riccati import MAX_DEFAULT_LEVEL, CareProblem, solve_generalized_care
from .steady_state import (coercivity_margin, forcing_from_steady,
                           solve_steady_picard)
from .timestepping import write_norm_history

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PROPERTY = 0, 2, 3, 4
LARGE_LEVEL = MAX_DEFAULT_LEVEL + 1

log = logging.getLogger("burgers_stab")


def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default,
                        help="config file, or the name of a bundled config (ex1, ex2, ex3)")
    parser.add_argument("--output", default=default, help="output directory")
    parser.add_argument("--allow-large", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help=f"permit level {LARGE_LEVEL} (dense Riccati solve)")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                        help="seed for randomized checks")
    parser.add_argument("--level", type=int, default=default, help="mesh level k")
    parser.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS if suppress else False)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="burgers-stab",
        description="Feedback stabilization of the 2D viscous Burgers equation.")
    parser.add_argument("--version", action="version", version=__version__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("verify", "run the numerical self-checks"),
                       ("run", "run an experiment and write its tables"),
                       ("care", "solve the Riccati equation at one level"),
                       ("steady", "solve the steady problem by Picard iteration"),
                       ("mesh-dump", "print a mesh level")):
        _common(sub.add_parser(name, help=text), suppress=True)
    return parser


def _resolve_config(spec):
    if spec is None:
        raise ConfigurationError("--config is required for this command")
    if not os.path.exists(spec) and os.sep not in spec:
        try:
            path = bundled_path(spec)
            if os.path.exists(path):
                spec = path
        except (ModuleNotFoundError, ValueError):
            pass
    return load_config(spec)


def _check_level(k, allow_large):
    if k < 1:
        raise ConfigurationError(f"level {k} must be >= 1")
    if k > LARGE_LEVEL:
        raise ConfigurationError(
            f"level {k} exceeds the maximum of {LARGE_LEVEL} for dense Riccati solves")
    if k > MAX_DEFAULT_LEVEL and not allow_large:
        raise ConfigurationError(
            f"level {k} exceeds {MAX_DEFAULT_LEVEL}; rerun with --allow-large "
            f"(level {LARGE_LEVEL} needs several GB of memory and minutes of CPU)")


def _workers(n_levels):
    raw = os.environ.get("BURGERS_STAB_THREADS")
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"BURGERS_STAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_levels))


def _output_dir(args, config=None):
    out = args.output or (config.output_directory if config else "output")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_verify(args, out):
    config = _resolve_config(args.config) if args.config else None
    rng = np.random.default_rng(args.seed)
    results = default_suite(rng, config)
    for r in results:
        out.write(r.line() + "\n")
    failed = sum(not r.passed for r in results)
    out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_PROPERTY if failed else EXIT_OK


def _write_run(table, results, directory, tag, controlled):
    with open(os.path.join(directory, f"{tag}.csv"), "w") as fh:
        fh.write(table.to_csv())
    with open(os.path.join(directory, f"{tag}.json"), "w") as fh:
        json.dump(table.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for res in results:
        with open(os.path.join(directory, f"{tag}-k{res.level}.jsonl"), "w") as fh:
            write_norm_history(res.trajectory, fh, res.physical)


def cmd_run(args, out):
    config = _resolve_config(args.config)
    if args.level is not None:
        config = config.with_levels([k for k in config.levels if k <= args.level])
    for k in config.levels:
        _check_level(k, args.allow_large)
    directory = _output_dir(args, config)
    with open(os.path.join(directory, "config.cfg"), "w") as fh:
        fh.write(dump_config(config))
    runs = [config.control_enabled]
    if config.control_enabled and config.compare_uncontrolled:
        runs.insert(0, False)
    workers = _workers(len(config.levels))
    for controlled in runs:
        start = time.perf_counter()
        result = run_experiment(config, controlled=controlled, workers=workers)
        table = result.table
        tag = table.metadata["example_id"]
        table.metadata["seconds"] = round(time.perf_counter() - start, 3)
        _write_run(table, result.levels, directory, tag, controlled)
        out.write(f"{tag}  (T={config.T}, dt rule {config.dt_rule})\n{table}\n\n")
    return EXIT_OK


def cmd_care(args, out):
    config = _resolve_config(args.config)
    if not config.control_enabled:
        raise ConfigurationError(
            "[control] enabled is false: there is no control operator for the Riccati equation")
    k = args.level if args.level is not None else config.levels[0]
    _check_level(k, args.allow_large)
    mesh = build_uniform_mesh(k)
    mats = assemble_static(mesh, config.physics, fe.parse(config.ys),
                           config.control_region, config.quad_order)
    sol = solve_generalized_care(CareProblem.from_matrices(mats))
    directory = _output_dir(args, config)
    write_matrix_market(os.path.join(directory, f"P_k{k}.mtx"), sol.P)
    write_matrix_market(os.path.join(directory, f"S_k{k}.mtx"), sol.S)
    out.write(f"level {k} ({mesh.n_dofs} unknowns)\n"
              f"relative residual      {sol.relative_residual:.3e}\n"
              f"closed-loop abscissa   {sol.closed_loop_abscissa:.6f}\n"
              f"omega_P                {sol.omega_P:.6f}\n"
              f"alpha                  {sol.alpha:.6f}\n"
              f"Newton-Kleinman steps  {sol.refinement_steps}\n")
    return EXIT_OK


def cmd_steady(args, out):
    config = _resolve_config(args.config)
    k = args.level if args.level is not None else config.levels[0]
    _check_level(k, args.allow_large)
    y_s = fe.parse(config.ys)
    mesh = build_uniform_mesh(k)
    mats = assemble_static(mesh, config.physics, y_s, None, config.quad_order)
    f_s = forcing_from_steady(y_s, config.physics)
    Y, increments = solve_steady_picard(mats, load_vector(mesh, f_s), config.physics)
    diff = Y - interpolate(mesh, lambda x1, x2: fe.evaluate(y_s, x1, x2))
    err = float(np.sqrt(diff @ (mats.M @ diff)))
    out.write(f"level {k}: Picard converged in {len(increments)} iterations\n"
              f"f_s = {fe.to_string(f_s)}\n"
              f"||Y_h - I_h y_s||_L2 = {err:.6e}\n")
    if mesh.n_dofs <= 1000:
        rep = coercivity_margin(mats, config.physics)
        out.write(f"coercivity margin {rep.margin:.6f}, gradient margin {rep.grad_margin:.6f}\n")
    if args.output:
        directory = _output_dir(args, config)
        with open(os.path.join(directory, f"steady-k{k}.jsonl"), "w") as fh:
            for i, inc in enumerate(increments, 1):
                fh.write(json.dumps({"iteration": i, "increment": inc}) + "\n")
    return EXIT_OK


def cmd_mesh_dump(args, out):
    k = args.level if args.level is not None else 2
    if not 1 <= k <= 8:
        raise ConfigurationError(f"level {k} must lie in 1..8")
    mesh = build_uniform_mesh(k)
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        with open(os.path.join(args.output, f"mesh-k{k}.txt"), "w") as fh:
            dump_mesh(mesh, fh)
    else:
        dump_mesh(mesh, out)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "run": cmd_run, "care": cmd_care,
            "steady": cmd_steady, "mesh-dump": cmd_mesh_dump}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (ConfigurationError, ArgumentError, ExprSyntaxError) as exc:
        print(f"burgers-stab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, EvaluationError) as exc:
        print(f"burgers-stab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
