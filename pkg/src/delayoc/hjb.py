"""Numerical probes of the dynamic-programming equation for the computed
value: finite-difference gradients in the pair space, the pointwise
equation residual, and closed-loop rollouts driven by the Hamiltonian's
argmax.

The gradient pairing <grad, transport of x> is evaluated through the
flow side, <x, (S(p1), dp1/dtheta)>, which only needs a discrete
derivative of the functional component of the gradient.  Residuals are
advisory where the value is nonsmooth; the quadratic instances are the
ones with a sharp expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .convex import HamiltonianSpec, UnboundedFeedbackError, feedback, hamiltonian
from .dde import ControlGrid, Grid, apply_history_functional, trapezoid, trapezoid_weights
from .structural import M2Point, evolve_abstract
from .value import ObjectiveSpec, PenalizedSolver, evaluate_J, as_m2

__all__ = [
    "GradientEstimate",
    "ResidualReport",
    "RolloutReport",
    "gradient_fd",
    "hjb_residual",
    "closed_loop_rollout",
    "spec_at_time",
]


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """Central-difference gradient of the value in the pair space.

    ``p1`` is quadrature-normalized: the trapezoid inner product of p1
    with a direction approximates the directional derivative.  ``compat``
    is |p0 - p1(0)|, small when the gradient sits in the generator's
    domain.  ``one_sided`` marks coordinates where a bump left the
    feasible region and a one-sided difference was used.
    """

    p0: float
    p1: np.ndarray
    compat: float
    bump: float
    one_sided: np.ndarray


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    compat: float
    low_confidence: bool
    time_derivative: float
    transport_pairing: float
    hamiltonian_value: float


@dataclass(frozen=True, eq=False)
class RolloutReport:
    J_closed: float
    W_n: float
    gap: float
    controls: np.ndarray
    aborted: bool
    abort_reason: str = ""


def spec_at_time(spec: ObjectiveSpec, t: float) -> ObjectiveSpec:
    """Same horizon and data, initial time moved to the grid-aligned t."""
    grid = spec.grid
    span = grid.horizon - t
    n_t = int(round(span / grid.delta))
    if abs(span - n_t * grid.delta) > 1e-9 * max(1.0, abs(span)) or n_t < 0:
        raise ValueError(f"initial time {t} is not grid aligned with the horizon")
    return replace(spec, grid=Grid(t, grid.n_r, n_t, grid.delta))


def _value_at(solver: PenalizedSolver, x: M2Point, warm=None) -> tuple:
    res = solver.solve(x, warm=warm)
    ok = res.converged and np.isfinite(res.value)
    return res.value, ok, res.control.values


def _point_profile(p1: np.ndarray) -> np.ndarray:
    """Pointwise-readable version of a quadrature-normalized gradient.

    The node at -R carries twice its pairing density (the transport
    recursion reads it with a full step weight while the trapezoid weight
    there is half a step), so point evaluations replace it with the
    interior extrapolation.  Inner products against directions must keep
    using the raw profile.
    """
    out = p1.copy()
    if out.size >= 3:
        out[0] = 2.0 * out[1] - out[2]
    return out


def gradient_fd(
    spec: ObjectiveSpec,
    n: float,
    t: float,
    x,
    bump: Optional[float] = None,
) -> GradientEstimate:
    """Finite-difference gradient of the penalized value at (t, x).

    Bumps the scalar coordinate and each node of the functional one,
    re-solving per bump; node differences are divided by the trapezoid
    weights so the sampled gradient pairs correctly.
    """
    base = spec_at_time(spec.with_n(n), t)
    solver = PenalizedSolver(base)
    x2 = as_m2(base, x)
    grid = base.grid
    n_r = grid.n_r
    if bump is None:
        bump = 1e-3 * (1.0 + x2.norm(grid.delta))
    center_val, center_ok, warm = _value_at(solver, x2)
    if not center_ok:
        raise ValueError("value not solvable at the base point")

    def diff(plus: M2Point, minus: M2Point):
        vp, okp, _ = _value_at(solver, plus, warm=warm)
        vm, okm, _ = _value_at(solver, minus, warm=warm)
        if okp and okm:
            return (vp - vm) / (2.0 * bump), False
        if okp:
            return (vp - center_val) / bump, True
        if okm:
            return (center_val - vm) / bump, True
        raise ValueError("both bumped points are unsolvable")

    one_sided = np.zeros(n_r + 2, dtype=bool)
    p0, flag = diff(
        M2Point(x2.x0 + bump, x2.x1), M2Point(x2.x0 - bump, x2.x1)
    )
    one_sided[0] = flag
    w = trapezoid_weights(n_r + 1, grid.delta)
    p1 = np.zeros(n_r + 1)
    for i in range(n_r + 1):
        e = np.zeros(n_r + 1)
        e[i] = bump
        d, flag = diff(M2Point(x2.x0, x2.x1 + e), M2Point(x2.x0, x2.x1 - e))
        p1[i] = d / w[i]
        one_sided[i + 1] = flag
    return GradientEstimate(
        p0=p0,
        p1=p1,
        compat=abs(p0 - p1[-1]),
        bump=bump,
        one_sided=one_sided,
    )


def hjb_residual(
    spec: ObjectiveSpec,
    n: float,
    t: float,
    x,
    bump: Optional[float] = None,
) -> ResidualReport:
    """Absolute residual of the dynamic-programming equation at (t, x).

    Needs a strictly feasible scalar coordinate (x0 > 0) so the state
    indicator contributes nothing.  The time slot uses a central
    difference one grid step wide; the transport pairing differentiates
    the functional gradient one-sidedly.  A large compatibility gap flags
    the report as low confidence.
    """
    base = spec_at_time(spec.with_n(n), t)
    x2 = as_m2(base, x)
    if x2.x0 <= 0.0:
        raise ValueError("residual requires a strictly feasible point (x0 > 0)")
    grid = base.grid
    delta = grid.delta
    grad = gradient_fd(base, n, t, x2, bump=bump)
    p1 = _point_profile(grad.p1)
    n_r = grid.n_r

    s_f = base.model.state_functional(n_r)
    c_f = base.model.control_functional(n_r)
    g_scalar = apply_history_functional(s_f, p1, delta)
    dp1 = np.empty(n_r + 1)
    dp1[:n_r] = (p1[1:] - p1[:n_r]) / delta
    dp1[n_r] = (p1[n_r] - p1[n_r - 1]) / delta
    pairing = x2.x0 * g_scalar + trapezoid(x2.x1 * dp1, delta)

    Lp = apply_history_functional(c_f, p1, delta)
    ham = hamiltonian(
        HamiltonianSpec(h=base.running, rho=base.model.rho, n=n), t, Lp
    )

    before = PenalizedSolver(spec_at_time(base, t - delta)).solve(x2)
    after = PenalizedSolver(spec_at_time(base, t + delta)).solve(x2)
    dT = (after.value - before.value) / (2.0 * delta)

    residual = abs(dT + pairing - ham)
    return ResidualReport(
        residual=float(residual),
        compat=grad.compat,
        low_confidence=bool(grad.compat > 10.0 * grad.bump),
        time_derivative=float(dT),
        transport_pairing=float(pairing),
        hamiltonian_value=float(ham),
    )


def closed_loop_rollout(spec: ObjectiveSpec, n: float, t: float, x) -> RolloutReport:
    """Drive the state with the Hamiltonian argmax of the local gradient.

    At every node the penalized value is differentiated at the current
    structural state, the co-state pairing is fed to the feedback map,
    and the state advances one step under the chosen control.  The
    realized cost can never beat the computed value by more than solver
    tolerance.
    """
    base = spec_at_time(spec.with_n(n), t)
    grid = base.grid
    x2 = as_m2(base, x)
    n_t = grid.n_t
    delta = grid.delta
    c_f = base.model.control_functional(grid.n_r)
    ham_spec = HamiltonianSpec(h=base.running, rho=base.model.rho, n=n)
    chosen: list = []
    x_cur = x2
    for m in range(n_t):
        t_m = grid.t + m * delta
        sub = spec_at_time(base, t_m)
        grad = gradient_fd(sub, n, t_m, x_cur)
        Lp = apply_history_functional(c_f, _point_profile(grad.p1), delta)
        try:
            c_m = feedback(ham_spec, t_m, Lp)
        except UnboundedFeedbackError as exc:
            return RolloutReport(
                J_closed=math.inf,
                W_n=math.nan,
                gap=math.nan,
                controls=np.array(chosen),
                aborted=True,
                abort_reason=str(exc),
            )
        chosen.append(c_m)
        padded = np.array(chosen + [chosen[-1]] * (n_t - len(chosen)))
        traj = evolve_abstract(base.model, grid, x2, ControlGrid(padded))
        x_cur = traj.points[m + 1]
    controls = np.array(chosen)
    J_closed = evaluate_J(base, x2, ControlGrid(controls))
    W = PenalizedSolver(base).solve(x2).value
    return RolloutReport(
        J_closed=float(J_closed),
        W_n=float(W),
        gap=float(J_closed - W),
        controls=controls,
        aborted=False,
    )
