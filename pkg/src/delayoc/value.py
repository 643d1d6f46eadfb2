"""Discretized planning objectives and their minimization.

The running cost, quadratic control penalty (index n), state-constraint
handling, and terminal cost are assembled on the same delay-aligned grid
the dynamics use.  The control-to-state map is affine, so each solve is a
convex composite problem:

    minimize_{c >= 0}   sum_k tau_k [ h(c_k) + |c_k|^2/(2n) ]
                        + phi(k_T)  + beta * sum_j w_j relu(-k_j)^2

with tau_k = delta * exp(-rho s_k).  The smooth part (terminal cost,
state penalty, quadratic control penalty) is differentiated exactly
through the affine dynamics; the nonsmooth part (h plus the nonnegative
orthant) is handled by its proximal map.  beta walks an increasing
schedule until the returned trajectory is feasible to within 1e-6; the
certificate is checked, never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .convex import ConvexScalarFn, IndicatorNonneg, LinearFn, Quadratic, prox_nonneg_weighted
from .dde import (
    ControlGrid,
    Grid,
    InitialTriple,
    ModelSpec,
    Trajectory,
    _derivative_estimates,
    _integrate,
)
from .structural import M2Point, abstract_forcing, build_x1, evolve_abstract

__all__ = [
    "ObjectiveSpec",
    "SolveResult",
    "SolverError",
    "IllPosedError",
    "BudgetExceededError",
    "evaluate_J",
    "solve_penalized",
    "PenalizedSolver",
    "value_W",
    "dp_oracle",
    "dpp_check",
    "convexity_check",
    "as_m2",
]

_INF = math.inf
DEFAULT_BETA_SCHEDULE = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6)
FEASIBILITY_TOL = 1e-6


class SolverError(RuntimeError):
    """Hard solver failure."""


class IllPosedError(SolverError):
    """The discretized objective is unbounded below."""


class BudgetExceededError(ValueError):
    """An enumeration oracle was asked for more work than its budget."""


@dataclass(frozen=True)
class ObjectiveSpec:
    """Everything a solve needs: model, grid, costs, and solver knobs.

    ``n`` is the quadratic control-penalty index (None means none).
    ``constraint_mode`` is ``"penalty"`` (state constraint enforced by the
    solver's quadratic penalty sweep) or ``"reject"`` (objective worth
    +inf on violating paths).
    """

    model: ModelSpec
    grid: Grid
    running: ConvexScalarFn
    terminal: ConvexScalarFn
    n: Optional[float] = None
    constraint_mode: str = "penalty"
    state_indicator: ConvexScalarFn = IndicatorNonneg()
    tol: float = 1e-8
    max_iter: int = 20000
    beta_schedule: Sequence[float] = DEFAULT_BETA_SCHEDULE

    def __post_init__(self):
        if self.constraint_mode not in ("penalty", "reject"):
            raise ValueError(f"unknown constraint mode {self.constraint_mode!r}")
        if self.n is not None and self.n < 1.0:
            raise ValueError("penalization index n must be >= 1 when finite")
        betas = tuple(float(b) for b in self.beta_schedule)
        if self.constraint_mode == "penalty" and betas:
            if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
                raise ValueError("beta schedule must be strictly increasing")
        object.__setattr__(self, "beta_schedule", betas)

    def with_n(self, n: Optional[float]) -> "ObjectiveSpec":
        return replace(self, n=n)

    def advanced(self, steps: int) -> "ObjectiveSpec":
        return replace(self, grid=self.grid.advanced(steps))


@dataclass(frozen=True, eq=False)
class SolveResult:
    value: float
    control: ControlGrid
    trajectory: Trajectory
    constraint_violation: float
    iterations: int
    converged: bool
    gap_estimate: float


def as_m2(spec: ObjectiveSpec, x: Union[M2Point, InitialTriple]) -> M2Point:
    """Accept either an initial triple or a structural pair."""
    if isinstance(x, InitialTriple):
        return build_x1(spec.model, spec.grid, x)
    return x


def _state_path(spec: ObjectiveSpec, x: M2Point, values: np.ndarray) -> np.ndarray:
    grid = spec.grid
    return _integrate(
        spec.model.state_functional(grid.n_r),
        spec.model.control_functional(grid.n_r),
        grid,
        x.x0,
        np.zeros(grid.n_r + 1),
        np.zeros(grid.n_r + 1),
        abstract_forcing(x.x1, grid.n_r),
        values,
    )


def _running_weights(spec: ObjectiveSpec) -> np.ndarray:
    grid = spec.grid
    s = grid.t + grid.delta * np.arange(grid.n_t)
    return grid.delta * np.exp(-spec.model.rho * s)


def evaluate_J(spec: ObjectiveSpec, x, control: ControlGrid) -> float:
    """Left-rectangle discretization of the planning objective.

    Returns +inf for any negative control step, and in reject mode for any
    negative state sample.  The quadratic control penalty is included when
    ``spec.n`` is finite.
    """
    control.validate(spec.grid)
    c = control.values
    if np.any(c < 0.0):
        return _INF
    x2 = as_m2(spec, x)
    k = _state_path(spec, x2, c)
    if spec.constraint_mode == "reject" and np.min(k) < 0.0:
        return _INF
    tau = _running_weights(spec)
    hvals = spec.running.eval_array(c)
    if not np.all(np.isfinite(hvals)):
        return _INF
    total = float(np.dot(tau, hvals))
    if spec.constraint_mode == "reject":
        gvals = spec.state_indicator.eval_array(k[: spec.grid.n_t])
        if not np.all(np.isfinite(gvals)):
            return _INF
        total += float(np.dot(tau, gvals))
    if spec.n is not None:
        total += float(np.dot(tau, c * c)) / (2.0 * spec.n)
    total += spec.terminal(k[-1])
    return total


class _Dynamics:
    """Affine control-to-state map on a fixed spec: k(c) = k_base(x) + M c."""

    def __init__(self, spec: ObjectiveSpec):
        self.spec = spec
        grid = spec.grid
        self.state_f = spec.model.state_functional(grid.n_r)
        self.ctrl_f = spec.model.control_functional(grid.n_r)
        n_t = grid.n_t
        cols = []
        zero_hist = np.zeros(grid.n_r + 1)
        for j in range(n_t):
            e = np.zeros(n_t)
            e[j] = 1.0
            cols.append(
                _integrate(self.state_f, self.ctrl_f, grid, 0.0, zero_hist, zero_hist, None, e)
            )
        self.M = np.stack(cols, axis=1) if n_t > 0 else np.zeros((1, 0))

    def k_base(self, x: M2Point) -> np.ndarray:
        grid = self.spec.grid
        return _integrate(
            self.state_f,
            self.ctrl_f,
            grid,
            x.x0,
            np.zeros(grid.n_r + 1),
            np.zeros(grid.n_r + 1),
            abstract_forcing(x.x1, grid.n_r),
            np.zeros(grid.n_t),
        )


def _subgradient_mid(f: ConvexScalarFn, v: float) -> float:
    lo, hi = f.subgradient(v)
    if not np.isfinite(lo) and not np.isfinite(hi):
        raise SolverError(f"terminal cost has no usable slope at {v}")
    if not np.isfinite(lo):
        return min(hi, 0.0)
    if not np.isfinite(hi):
        return max(lo, 0.0)
    return 0.5 * (lo + hi)


def _curvature_bound(f: ConvexScalarFn, v: float) -> float:
    if isinstance(f, Quadratic):
        return f.coeff
    if isinstance(f, LinearFn):
        return 0.0
    e = 1e-4 * (1.0 + abs(v))
    try:
        second = (f(v + e) - 2.0 * f(v) + f(v - e)) / (e * e)
    except (ValueError, OverflowError):
        return 1.0
    if not np.isfinite(second):
        return 1.0
    return max(second, 0.0)


class PenalizedSolver:
    """Proximal-gradient minimizer of the discretized penalized objective.

    One instance caches the affine dynamics of its spec; ``solve`` may be
    called repeatedly (different initial pairs, warm starts).
    """

    def __init__(self, spec: ObjectiveSpec, dynamics: Optional[_Dynamics] = None):
        if spec.n is None:
            raise ValueError("solve requires a finite penalization index n")
        self.spec = spec
        self.dyn = dynamics if dynamics is not None else _Dynamics(spec)
        grid = spec.grid
        self.tau = _running_weights(spec)
        s_all = grid.t + grid.delta * np.arange(grid.n_t + 1)
        self.w_pen = grid.delta * np.exp(-spec.model.rho * s_all)
        self.uses_penalty = spec.constraint_mode == "penalty"

    # smooth part: terminal cost + state penalty + quadratic control cost
    def smooth_value(self, khom: np.ndarray, c: np.ndarray, beta: float) -> float:
        k = khom + self.dyn.M @ c
        val = self.spec.terminal(k[-1])
        if self.uses_penalty:
            viol = np.minimum(k, 0.0)
            val += beta * float(np.dot(self.w_pen, viol * viol))
        val += float(np.dot(self.tau, c * c)) / (2.0 * self.spec.n)
        return val

    def smooth_gradient(self, khom: np.ndarray, c: np.ndarray, beta: float) -> np.ndarray:
        k = khom + self.dyn.M @ c
        dk = np.zeros_like(k)
        dk[-1] = _subgradient_mid(self.spec.terminal, k[-1])
        if self.uses_penalty:
            dk += beta * self.w_pen * 2.0 * np.minimum(k, 0.0)
        return self.dyn.M.T @ dk + self.tau * c / self.spec.n

    def _lipschitz(self, khom: np.ndarray, c: np.ndarray, beta: float) -> float:
        M = self.dyn.M
        k = khom + M @ c
        phi2 = _curvature_bound(self.spec.terminal, k[-1])
        diag = self.tau / self.spec.n
        pen = 2.0 * beta * self.w_pen if self.uses_penalty else np.zeros_like(self.w_pen)
        v = np.ones(M.shape[1]) / math.sqrt(M.shape[1])
        lam = 1.0
        for _ in range(60):
            w = M @ v
            hv = M.T @ (pen * w) + phi2 * M[-1] * w[-1] + diag * v
            lam = float(np.linalg.norm(hv))
            if lam <= 0.0:
                break
            v = hv / lam
        return max(lam, 1e-12)

    def _objective(self, khom, c, beta):
        hvals = self.spec.running.eval_array(c)
        if not np.all(np.isfinite(hvals)):
            return _INF
        return self.smooth_value(khom, c, beta) + float(np.dot(self.tau, hvals))

    def _grad_map_norm(self, khom, c, beta, alpha):
        g = self.smooth_gradient(khom, c, beta)
        step = prox_nonneg_weighted(self.spec.running, alpha * self.tau, c - alpha * g)
        return float(np.max(np.abs(c - step))) / alpha

    def solve(self, x, warm: Optional[np.ndarray] = None) -> SolveResult:
        spec = self.spec
        grid = spec.grid
        x2 = as_m2(spec, x)
        if grid.n_t == 0:
            k = np.array([x2.x0])
            traj = Trajectory(k=k, kdot=np.zeros(1), output=spec.model.output_factor() * k)
            return SolveResult(
                value=spec.terminal(x2.x0),
                control=ControlGrid(np.zeros(0)),
                trajectory=traj,
                constraint_violation=max(0.0, -x2.x0),
                iterations=0,
                converged=True,
                gap_estimate=0.0,
            )
        khom = self.dyn.k_base(x2)
        horizon = grid.horizon
        if warm is not None:
            c = np.maximum(np.asarray(warm, dtype=float).copy(), 1e-12)
        elif x2.x0 > 0 and horizon > 0:
            c = np.full(grid.n_t, 0.1 * x2.x0 / horizon)
        else:
            c = np.full(grid.n_t, 0.1)

        betas = spec.beta_schedule if self.uses_penalty else (0.0,)
        total_iter = 0
        gm = _INF
        for beta in betas:
            c, it, gm = self._fista(khom, c, beta)
            total_iter += it
            k_path = khom + self.dyn.M @ c
            viol = max(0.0, -float(np.min(k_path)))
            if not self.uses_penalty or viol <= FEASIBILITY_TOL:
                break
        k_path = khom + self.dyn.M @ c
        viol = max(0.0, -float(np.min(k_path)))
        feasible = (not self.uses_penalty) or viol <= FEASIBILITY_TOL
        converged = gm <= spec.tol and feasible

        kdot = _derivative_estimates(
            self.dyn.state_f,
            self.dyn.ctrl_f,
            grid,
            k_path,
            np.zeros(grid.n_r + 1),
            np.zeros(grid.n_r + 1),
            abstract_forcing(x2.x1, grid.n_r),
            c,
        )
        traj = Trajectory(
            k=k_path, kdot=kdot, output=spec.model.output_factor() * k_path
        )
        control = ControlGrid(c)
        value = evaluate_J(spec, x2, control)
        if not np.isfinite(value) and spec.constraint_mode == "reject":
            value = _INF
        return SolveResult(
            value=float(value),
            control=control,
            trajectory=traj,
            constraint_violation=viol,
            iterations=total_iter,
            converged=bool(converged),
            gap_estimate=float(gm),
        )

    def _fista(self, khom, c, beta):
        spec = self.spec
        L = self._lipschitz(khom, c, beta)
        alpha = 1.0 / L
        y = c.copy()
        tk = 1.0
        obj_c = self._objective(khom, c, beta)
        it = 0
        gm = _INF
        check_every = 5
        while it < spec.max_iter:
            it += 1
            g = self.smooth_gradient(khom, y, beta)
            sm_y = self.smooth_value(khom, y, beta)
            while True:
                c_new = prox_nonneg_weighted(
                    spec.running, alpha * self.tau, y - alpha * g
                )
                diff = c_new - y
                quad = sm_y + float(np.dot(g, diff)) + float(np.dot(diff, diff)) / (
                    2.0 * alpha
                )
                if self.smooth_value(khom, c_new, beta) <= quad + 1e-12 * (
                    1.0 + abs(quad)
                ):
                    break
                alpha *= 0.5
                if alpha < 1e-18:
                    raise SolverError("backtracking step collapsed")
            obj_new = self._objective(khom, c_new, beta)
            if obj_new < -1e14:
                raise IllPosedError("objective is unbounded below on this data")
            if obj_new > obj_c + 1e-12 * (1.0 + abs(obj_c)):
                # momentum overshoot: restart from the last iterate, from
                # which a plain proximal step cannot increase the objective
                tk = 1.0
                y = c.copy()
                continue
            tk_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            y = c_new + ((tk - 1.0) / tk_next) * (c_new - c)
            c = c_new
            obj_c = obj_new
            tk = tk_next
            if it % check_every == 0 or it == spec.max_iter:
                gm = self._grad_map_norm(khom, c, beta, alpha)
                if gm <= spec.tol:
                    break
        if math.isinf(gm):
            gm = self._grad_map_norm(khom, c, beta, alpha)
        return c, it, gm


def solve_penalized(spec: ObjectiveSpec, x, warm=None) -> SolveResult:
    """Minimize the discretized objective with finite index n from x."""
    return PenalizedSolver(spec).solve(x, warm=warm)


def value_W(spec: ObjectiveSpec, x, n_list: Sequence[float]) -> dict:
    """Solve along an increasing list of penalization indices.

    Returns the per-index results, the monotonicity verdict (the values
    must be nonincreasing within 10 * tol), the last value as the limit
    estimate, and the successive differences as the convergence
    diagnostic.  No extrapolation is performed.
    """
    ns = [float(n) for n in n_list]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_list must be strictly increasing")
    dyn = _Dynamics(spec)
    results = {}
    warm = None
    for n in ns:
        solver = PenalizedSolver(spec.with_n(n), dynamics=dyn)
        res = solver.solve(x, warm=warm)
        results[n] = res
        warm = res.control.values
    values = np.array([results[n].value for n in ns])
    diffs = values[:-1] - values[1:]
    monotone_ok = bool(np.all(diffs >= -10.0 * spec.tol))
    return {
        "n_list": ns,
        "results": results,
        "W_table": values,
        "W_estimate": float(values[-1]),
        "diffs": diffs,
        "monotone_ok": monotone_ok,
    }


def dp_oracle(spec: ObjectiveSpec, x, levels) -> float:
    """Exhaustive minimum of the discretized objective over level controls.

    Every piecewise-constant control drawn from ``levels`` is evaluated;
    an upper bound on the grid optimum that tightens as the level set
    refines.  Refuses budgets above 1e6 combinations.
    """
    levels = np.asarray(levels, dtype=float)
    n_t = spec.grid.n_t
    count = float(levels.size) ** n_t
    if count > 1e6:
        raise BudgetExceededError(
            f"{levels.size}^{n_t} = {count:.3g} combinations exceed the 1e6 budget"
        )
    x2 = as_m2(spec, x)
    dyn = _Dynamics(spec)
    khom = dyn.k_base(x2)
    grids = np.meshgrid(*([levels] * n_t), indexing="ij")
    combos = np.stack([g.reshape(-1) for g in grids], axis=1)
    k_paths = khom[None, :] + combos @ dyn.M.T
    tau = _running_weights(spec)
    hvals = spec.running.eval_array(combos)
    cost = np.where(
        np.all(np.isfinite(hvals), axis=1), (hvals * tau).sum(axis=1), _INF
    )
    cost = np.where(np.any(combos < 0.0, axis=1), _INF, cost)
    if spec.n is not None:
        cost = cost + (combos * combos * tau).sum(axis=1) / (2.0 * spec.n)
    cost = cost + spec.terminal.eval_array(k_paths[:, -1])
    if spec.constraint_mode == "reject":
        cost = np.where(k_paths.min(axis=1) < 0.0, _INF, cost)
    return float(np.min(cost))


def dpp_check(spec: ObjectiveSpec, x, delta_steps: int) -> float:
    """Split-horizon consistency of the computed value.

    Solves the full problem, evolves the structural state to the split
    node under the optimal control, re-solves from there, and returns
    | W(t, x) - running head cost - W(t', y(t')) |.
    """
    if delta_steps < 0 or delta_steps > spec.grid.n_t:
        raise ValueError("split must lie inside the horizon")
    x2 = as_m2(spec, x)
    full = solve_penalized(spec, x2)
    if delta_steps == 0:
        other = solve_penalized(spec, x2)
        return abs(full.value - other.value)
    c = full.control.values
    traj = evolve_abstract(spec.model, spec.grid, x2, full.control)
    x_mid = traj.points[delta_steps]
    tau = _running_weights(spec)[:delta_steps]
    head_c = c[:delta_steps]
    head = float(np.dot(tau, spec.running.eval_array(head_c)))
    if spec.n is not None:
        head += float(np.dot(tau, head_c * head_c)) / (2.0 * spec.n)
    if delta_steps == spec.grid.n_t:
        tail_value = spec.terminal(x_mid.x0)
    else:
        tail_value = solve_penalized(spec.advanced(delta_steps), x_mid).value
    return abs(full.value - head - tail_value)


def convexity_check(
    spec: ObjectiveSpec,
    x_center: M2Point,
    n_segments: int,
    rng: np.random.Generator,
    x0_spread: float = 0.1,
    x1_spread: float = 0.05,
) -> float:
    """Midpoint convexity of the computed value over random segments.

    Samples pairs around ``x_center``, solves the two endpoints and the
    midpoint, and returns the largest positive violation of
    W(mid) <= (W(a) + W(b)) / 2.
    """
    dyn = _Dynamics(spec)
    solver = PenalizedSolver(spec, dynamics=dyn)
    n_r = x_center.n_r
    worst = 0.0
    for _ in range(n_segments):
        pts = []
        for _ in range(2):
            dx0 = x0_spread * rng.uniform(-1.0, 1.0)
            bump = x1_spread * rng.uniform(-1.0, 1.0, size=n_r + 1)
            pts.append(M2Point(x_center.x0 + dx0, x_center.x1 + bump))
        a, b = pts
        mid = M2Point(0.5 * (a.x0 + b.x0), 0.5 * (a.x1 + b.x1))
        wa = solver.solve(a).value
        wb = solver.solve(b).value
        wm = solver.solve(mid).value
        worst = max(worst, wm - 0.5 * (wa + wb))
    return worst
