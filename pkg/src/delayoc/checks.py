"""Named verification checks behind the command line front end.

Each check returns machine-readable entries {name, passed, measured,
threshold}; thresholds mirror the package's acceptance suite.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .config import RunConfig, build_grid, build_model, build_objective, read_m2_point
from .convex import Crra, Quadratic, absolute_value, yosida_conjugate_check
from .dde import ControlGrid, Grid, InitialTriple, ModelSpec, simulate
from .hjb import closed_loop_rollout, hjb_residual
from .structural import M2Point, build_x1, evolve_abstract
from .value import dpp_check

__all__ = ["run_checks"]


def _entry(name: str, passed: bool, measured: float, threshold: float) -> dict:
    return {
        "name": name,
        "passed": bool(passed),
        "measured": float(measured),
        "threshold": float(threshold),
    }


def _random_ak_instance(rng: np.random.Generator, n_r: int = 20):
    model = ModelSpec(kind="AK", a=float(rng.uniform(0.1, 1.0)), R=1.0, rho=0.0)
    grid = Grid.for_model(model, 0.0, 2.0, n_r)
    init = InitialTriple(
        phi0=float(rng.uniform(0.5, 1.5)),
        phi1=rng.uniform(-1.0, 1.0, n_r + 1),
        omega=rng.uniform(0.0, 1.0, n_r + 1),
    )
    control = ControlGrid(rng.uniform(0.0, 1.0, grid.n_t))
    return model, grid, init, control


def _lift_control(values: np.ndarray, factor: int) -> np.ndarray:
    return np.repeat(values, factor)


def _lift_history(nodes: np.ndarray, factor: int) -> np.ndarray:
    n = nodes.size - 1
    fine = np.linspace(0.0, n, factor * n + 1)
    return np.interp(fine, np.arange(n + 1), nodes)


def check_equivalence(seed: int) -> list:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        model, grid, init, control = _random_ak_instance(rng)
        k_sim = simulate(model, grid, init, control).k
        x = build_x1(model, grid, init)
        k_abs = evolve_abstract(model, grid, x, control).y0
        worst = max(worst, float(np.max(np.abs(k_sim - k_abs))))
    out = [_entry("equivalence.gap", worst <= 1e-10, worst, 1e-10)]

    model, grid, init, control = _random_ak_instance(rng)
    orders = []
    fine_grid = Grid.for_model(model, 0.0, 2.0, 200)
    fine_init = InitialTriple(
        init.phi0, _lift_history(init.phi1, 10), _lift_history(init.omega, 10)
    )
    fine = simulate(model, fine_grid, fine_init, ControlGrid(_lift_control(control.values, 10)))
    ref_coarse = fine.k[::10]
    err1 = float(np.max(np.abs(simulate(model, grid, init, control).k - ref_coarse)))
    grid2 = Grid.for_model(model, 0.0, 2.0, 40)
    init2 = InitialTriple(init.phi0, _lift_history(init.phi1, 2), _lift_history(init.omega, 2))
    k2 = simulate(model, grid2, init2, ControlGrid(_lift_control(control.values, 2))).k
    err2 = float(np.max(np.abs(k2[::2] - fine.k[::10][: k2[::2].size])))
    order = np.log2(err1 / err2) if err2 > 0 else 2.0
    orders.append(order)
    out.append(_entry("equivalence.order", min(orders) >= 0.9, float(min(orders)), 0.9))
    return out


def check_legendre() -> list:
    cases = [
        (Quadratic(1.0), np.linspace(-5.0, 5.0, 21)),
        (absolute_value(), np.linspace(-0.9, 0.9, 19)),
        (Crra(2.0), np.linspace(-3.0, -0.1, 15)),
    ]
    worst = 0.0
    for f, grid in cases:
        for n in (1.0, 2.0, 8.0):
            worst = max(worst, yosida_conjugate_check(f, n, grid))
    return [_entry("legendre.yosida", worst <= 1e-5, worst, 1e-5)]


def _problem_from(cfg: RunConfig, x_path: Optional[str]):
    probe = cfg.get_int("grid.nR")
    if probe is None:
        from .config import ConfigError

        raise ConfigError(f"{cfg.path}: missing required key 'grid.nR'")
    model = build_model(cfg, probe)
    grid = build_grid(cfg, model)
    spec = build_objective(cfg, model, grid)
    if x_path is not None:
        x = read_m2_point(x_path, grid.n_r)
    else:
        x = M2Point(1.0, np.zeros(grid.n_r + 1))
    n = spec.n if spec.n is not None else 8.0
    return spec, x, n


def check_dpp(cfg: RunConfig, x_path: Optional[str]) -> list:
    spec, x, n = _problem_from(cfg, x_path)
    spec = spec.with_n(n)
    split = max(1, spec.grid.n_t // 2)
    residual = dpp_check(spec, x, split)
    threshold = 5.0 * spec.tol
    return [_entry("dpp.residual", residual <= threshold, residual, threshold)]


def check_hjb(cfg: RunConfig, x_path: Optional[str]) -> list:
    spec, x, n = _problem_from(cfg, x_path)
    t = spec.grid.t
    r1 = hjb_residual(spec, n, t, x, bump=1e-3).residual
    model2 = build_model(cfg, 2 * spec.grid.n_r)
    grid2 = Grid.for_model(model2, t, spec.grid.horizon, 2 * spec.grid.n_r)
    spec2 = build_objective(cfg, model2, grid2, n=n)
    x2 = M2Point(x.x0, _lift_history(x.x1, 2))
    r2 = hjb_residual(spec2, n, t, x2, bump=5e-4).residual
    ratio = r2 / r1 if r1 > 0 else 0.0
    return [
        _entry("hjb.residual_coarse", np.isfinite(r1) and r1 < 1.0, r1, 1.0),
        _entry("hjb.refinement", ratio <= 1.2, ratio, 1.2),
    ]


def check_rollout(cfg: RunConfig, x_path: Optional[str]) -> list:
    spec, x, n = _problem_from(cfg, x_path)
    rep = closed_loop_rollout(spec, n, spec.grid.t, x)
    if rep.aborted:
        return [_entry("rollout.gap", False, float("nan"), 5e-2)]
    ok = -5.0 * spec.tol <= rep.gap <= 5e-2
    return [_entry("rollout.gap", ok, rep.gap, 5e-2)]


def run_checks(cfg: RunConfig, which: str, seed: int, x_path: Optional[str]) -> list:
    out = []
    if which in ("equivalence", "all"):
        out.extend(check_equivalence(seed))
    if which in ("legendre", "all"):
        out.extend(check_legendre())
    if which in ("dpp", "all"):
        out.extend(check_dpp(cfg, x_path))
    if which in ("hjb", "all"):
        out.extend(check_hjb(cfg, x_path))
    if which in ("rollout", "all"):
        out.extend(check_rollout(cfg, x_path))
    return out
