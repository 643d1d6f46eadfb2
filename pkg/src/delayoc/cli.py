"""Batch front end: simulate trajectories, sweep penalized values, run
named verification checks, and render report figures.

Exit statuses: 0 pass, 1 usage or parse error, 2 criterion failure,
3 solver hard failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checks
from .config import (
    ConfigError,
    build_grid,
    build_model,
    build_objective,
    format_value,
    parse_config,
    read_initial_triple,
    read_m2_point,
)
from .dde import ControlGrid, simulate
from .value import SolverError, value_W

__all__ = ["main", "cmd_simulate", "cmd_value", "cmd_check", "cmd_report"]

_CHECK_NAMES = ("equivalence", "legendre", "dpp", "hjb", "rollout", "all")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _control_from(cfg, grid):
    level = cfg.get_float("simulate.c", 0.0)
    return ControlGrid(np.full(grid.n_t, level))


def _nodal(values: np.ndarray, n_t: int) -> np.ndarray:
    out = np.empty(n_t + 1)
    if n_t > 0:
        out[:n_t] = values
        out[n_t] = values[-1]
    else:
        out[:] = 0.0
    return out


def cmd_simulate(config_path, init_path, out_dir) -> int:
    cfg = parse_config(config_path)
    probe = cfg.get_int("grid.nR")
    if probe is None:
        raise ConfigError(f"{config_path}: missing required key 'grid.nR'")
    model = build_model(cfg, probe)
    grid = build_grid(cfg, model)
    init = read_initial_triple(init_path, grid.n_r)
    control = _control_from(cfg, grid)
    traj = simulate(model, grid, init, control)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    times = grid.forward_times()
    c_nodes = _nodal(control.values, grid.n_t)
    if model.kind == "AK":
        invest = model.a * traj.k - c_nodes
    else:
        invest = c_nodes
    dest = out / "trajectory.csv"
    with dest.open("w") as fh:
        fh.write("s,k,kdot,output,i,c\n")
        for j in range(grid.n_t + 1):
            row = (times[j], traj.k[j], traj.kdot[j], traj.output[j], invest[j], c_nodes[j])
            fh.write(",".join(format_value(v) for v in row) + "\n")
    print(dest)
    return 0


def cmd_value(config_path, x_path, out_dir) -> int:
    cfg = parse_config(config_path)
    probe = cfg.get_int("grid.nR")
    if probe is None:
        raise ConfigError(f"{config_path}: missing required key 'grid.nR'")
    model = build_model(cfg, probe)
    grid = build_grid(cfg, model)
    spec = build_objective(cfg, model, grid)
    x = read_m2_point(x_path, grid.n_r)
    n_list = cfg.get_list("solver.nlist", [1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    sweep = value_W(spec, x, n_list)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dest = out / "value.csv"
    diffs = sweep["diffs"]
    tail = float(diffs[-1]) if diffs.size else 0.0
    total_iter = sum(sweep["results"][n].iterations for n in sweep["n_list"])
    with dest.open("w") as fh:
        fh.write("n,W_n,iterations,constraint_violation,gap_estimate,converged\n")
        for n in sweep["n_list"]:
            r = sweep["results"][n]
            fh.write(
                ",".join(
                    [
                        format_value(n),
                        format_value(r.value),
                        str(r.iterations),
                        format_value(r.constraint_violation),
                        format_value(r.gap_estimate),
                        str(int(r.converged)),
                    ]
                )
                + "\n"
            )
        last = sweep["results"][sweep["n_list"][-1]]
        fh.write(
            ",".join(
                [
                    "W",
                    format_value(sweep["W_estimate"]),
                    str(total_iter),
                    format_value(last.constraint_violation),
                    format_value(tail),
                    str(int(sweep["monotone_ok"])),
                ]
            )
            + "\n"
        )
    print(dest)
    return 0 if sweep["monotone_ok"] else 2


def cmd_check(config_path, which, seed, x_path, out_dir) -> int:
    if which not in _CHECK_NAMES:
        raise _UsageError(
            f"unknown check name {which!r}; choose from {', '.join(_CHECK_NAMES)}"
        )
    cfg = parse_config(config_path)
    results = checks.run_checks(cfg, which, seed=seed, x_path=x_path)
    report = {
        "which": which,
        "seed": seed,
        "checks": results,
        "passed": all(item["passed"] for item in results),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dest = out / "check.json"
        dest.write_text(text)
        print(dest)
    else:
        sys.stdout.write(text)
    return 0 if report["passed"] else 2


def cmd_report(config_path, init_path, x_path, out_dir) -> int:
    from . import report as fig

    if init_path is None and x_path is None:
        raise _UsageError("report needs --init and/or --x")
    cfg = parse_config(config_path)
    probe = cfg.get_int("grid.nR")
    if probe is None:
        raise ConfigError(f"{config_path}: missing required key 'grid.nR'")
    model = build_model(cfg, probe)
    grid = build_grid(cfg, model)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    if init_path is not None:
        rc = cmd_simulate(config_path, init_path, out_dir)
        status = max(status, rc)
        init = read_initial_triple(init_path, grid.n_r)
        control = _control_from(cfg, grid)
        traj = simulate(model, grid, init, control)
        fig.save_trajectory_figure(
            grid.forward_times(),
            traj,
            _nodal(control.values, grid.n_t),
            out / "trajectory.png",
        )
        print(out / "trajectory.png")
    if x_path is not None:
        rc = cmd_value(config_path, x_path, out_dir)
        status = max(status, rc)
        spec = build_objective(cfg, model, grid)
        x = read_m2_point(x_path, grid.n_r)
        n_list = cfg.get_list("solver.nlist", [1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
        sweep = value_W(spec, x, n_list)
        fig.save_value_chain_figure(sweep["n_list"], sweep["W_table"], out / "value_chain.png")
        print(out / "value_chain.png")
    return status


def main(argv=None) -> int:
    parser = _Parser(prog="delayoc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate a trajectory to CSV")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--init", required=True, help="initial triple CSV")
    p_sim.add_argument("--out", required=True, help="output directory")

    p_val = sub.add_parser("value", help="penalized value sweep to CSV")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--x", required=True, help="pair data CSV")
    p_val.add_argument("--out", required=True)

    p_chk = sub.add_parser("check", help="run named verification checks")
    p_chk.add_argument("--config", required=True)
    p_chk.add_argument("--which", default="all")
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--x", default=None)
    p_chk.add_argument("--out", default=None)

    p_rep = sub.add_parser("report", help="CSV output plus rendered figures")
    p_rep.add_argument("--config", required=True)
    p_rep.add_argument("--init", default=None)
    p_rep.add_argument("--x", default=None)
    p_rep.add_argument("--out", required=True)

    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args.config, args.init, args.out)
        if args.command == "value":
            return cmd_value(args.config, args.x, args.out)
        if args.command == "check":
            return cmd_check(args.config, args.which, args.seed, args.x, args.out)
        if args.command == "report":
            return cmd_report(args.config, args.init, args.x, args.out)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
