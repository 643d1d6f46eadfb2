"""State-plus-memory reformulation of the delay models on R x L2([-R, 0]).

A delayed trajectory is summarized at each time s by a pair
y(s) = (y0(s), y1(s)): the current state and a function on [-R, 0] that
aggregates everything the past still owes the future.  The pair evolves
under a transport-type recursion that never consults the original
histories directly, only their image x1 under the reflection operators
built here.  The payoff is that (x0, x1) is a sufficient statistic: two
initial data with the same image generate the same forward trajectories.

Sampled representatives of L2 objects need explicit endpoint rules
(single nodes carry no L2 information).  The rules used here are chosen
so that the discrete evolution started from an intermediate structural
state concatenates exactly with the original run:

* ``lbar`` never sees the point mass at 0 (the zero extension kills it);
  its density quadrature closes the shifted window with a full-weight
  node for data windows of the running state and a half-weight node for
  control windows (``data_edge``);
* the memory assembly zeroes the node at the current time in the
  reflected forward paths, and shifts x1 with its diagonal kept;
* the public ``eta_shift`` follows the transport semantics instead:
  identity at s = t, all zeros once s - t reaches R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dde import (
    ControlGrid,
    Grid,
    HistoryFunctional,
    InitialTriple,
    ModelSpec,
    _freeze,
    _integrate,
    simulate,
    trapezoid,
)

__all__ = [
    "M2Point",
    "StructuralTrajectory",
    "lbar",
    "build_x1",
    "eta_shift",
    "structural_trajectory",
    "evolve_abstract",
    "semigroup_apply",
    "m2_inner",
    "abstract_forcing",
]


@dataclass(frozen=True, eq=False)
class M2Point:
    """Element (x0, x1) of R x L2([-R, 0]), x1 held as n_r + 1 node samples."""

    x0: float
    x1: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise ValueError("x0 must be finite")
        object.__setattr__(self, "x1", _freeze(self.x1, name="x1"))

    @property
    def n_r(self) -> int:
        return self.x1.size - 1

    def norm(self, delta: float) -> float:
        return float(np.sqrt(m2_inner(self, self, delta)))


def m2_inner(p: M2Point, q: M2Point, delta: float) -> float:
    """Inner product x0*y0 + trapezoid(x1*y1)."""
    return p.x0 * q.x0 + trapezoid(p.x1 * q.x1, delta)


@dataclass(frozen=True, eq=False)
class StructuralTrajectory:
    """Structural states at the forward grid nodes; points[0] is the datum."""

    points: tuple

    @property
    def y0(self) -> np.ndarray:
        return np.array([p.x0 for p in self.points])

    def __len__(self) -> int:
        return len(self.points)


def lbar(f: HistoryFunctional, u, delta: float, role: str = "state") -> np.ndarray:
    """Image of a history under the reflected zero-extension of ``f``.

    Node i (angle -R + i*delta) of the output applies ``f`` to the
    zero-extended input shifted so its support ends at the reflected
    node; for the two-point difference functional this collapses to
    out[i] = -u[n_r - i], and the point mass at 0 never contributes.

    The density part integrates over the shifted window [-R, alpha_i].
    ``role`` fixes how the closing node of the input is treated, a
    convention on a measure-zero point chosen so that the image feeds the
    transport recursion exactly: state histories are read closed at their
    final node, control histories are right continuous there (the final
    node belongs to the forward control), so a control image never
    consults it and its own node 0 vanishes.
    """
    if role not in ("state", "control"):
        raise ValueError(f"unknown lbar role {role!r}")
    hist = np.asarray(u, dtype=float).reshape(-1)
    n_r = hist.size - 1
    if f.density is not None and f.density.size != hist.size:
        raise ValueError(
            f"history has {hist.size} samples but density has {f.density.size}"
        )
    out = f.cR * hist[::-1]
    if role == "control":
        out[0] = 0.0
    if f.density is not None:
        d = f.density
        top = hist[n_r]
        for i in range(n_r + 1):
            if i == 0:
                q = 0.5 * d[0] * top if role == "state" else 0.0
            else:
                vals = hist[n_r - i :]
                q = 0.5 * d[0] * vals[0]
                if i >= 2:
                    q += float(np.dot(d[1:i], vals[1:i]))
                if role == "state" and i < n_r:
                    q += d[i] * top
            out[i] += delta * q
    return out


def build_x1(model: ModelSpec, grid: Grid, init: InitialTriple) -> M2Point:
    """Aggregate the initial histories into the memory component x1."""
    init.validate(model, grid)
    s_f = model.state_functional(grid.n_r)
    c_f = model.control_functional(grid.n_r)
    x1 = lbar(s_f, init.phi1, grid.delta) + lbar(
        c_f, init.omega, grid.delta, role="control"
    )
    return M2Point(x0=init.phi0, x1=x1)


def eta_shift(grid: Grid, s: float, u) -> np.ndarray:
    """Shift a [-R, 0] function by the elapsed time s - t, zero-filling.

    Nodes below -R + (s - t) vanish; for s - t >= R the result is all
    zeros (the datum is fully forgotten).
    """
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size != grid.n_r + 1:
        raise ValueError(f"expected {grid.n_r + 1} samples, got {arr.size}")
    rel = (s - grid.t) / grid.delta
    k = int(round(rel))
    if abs(rel - k) > 1e-9 or k < 0:
        raise ValueError(f"time {s} is off-grid or earlier than {grid.t}")
    out = np.zeros(grid.n_r + 1)
    if k < grid.n_r:
        out[k:] = arr[: grid.n_r + 1 - k]
    return out


def abstract_forcing(x1: np.ndarray, n_r: int) -> np.ndarray:
    """Scalar forcing read off the shifted memory at angle 0."""
    if x1.size != n_r + 1:
        raise ValueError(f"expected {n_r + 1} samples, got {x1.size}")
    return x1[::-1].copy()


def _shift_kept_diagonal(x1: np.ndarray, m: int, n_r: int) -> np.ndarray:
    # memory carried to node m; unlike eta_shift the diagonal survives at
    # m = n_r, which is what makes restarts concatenate exactly
    out = np.zeros(n_r + 1)
    if m <= n_r:
        out[m:] = x1[: n_r + 1 - m]
    return out


def _nodal_forward_control(values: np.ndarray, n_t: int) -> np.ndarray:
    # right-continuous nodal reading of a piecewise-constant control
    out = np.zeros(n_t + 1)
    if n_t > 0:
        idx = np.minimum(np.arange(n_t + 1), n_t - 1)
        out[:] = values[idx]
    return out


def _assemble_points(
    model: ModelSpec,
    grid: Grid,
    x: M2Point,
    k_fwd: np.ndarray,
    values: np.ndarray,
) -> StructuralTrajectory:
    n_r, n_t, delta = grid.n_r, grid.n_t, grid.delta
    s_f = model.state_functional(n_r)
    c_f = model.control_functional(n_r)
    # state path zero-extended through the node at the current start, the
    # control path only below it (right continuity again)
    ext_k = np.concatenate([np.zeros(n_r + 1), k_fwd[1:]])
    ext_c = np.concatenate([np.zeros(n_r), _nodal_forward_control(values, n_t)])
    points = []
    for m in range(n_t + 1):
        y1 = (
            lbar(s_f, ext_k[m : m + n_r + 1], delta)
            + lbar(c_f, ext_c[m : m + n_r + 1], delta, role="control")
            + _shift_kept_diagonal(x.x1, m, n_r)
        )
        points.append(M2Point(k_fwd[m], y1))
    return StructuralTrajectory(points=tuple(points))


def structural_trajectory(
    model: ModelSpec, grid: Grid, init: InitialTriple, control: ControlGrid
) -> StructuralTrajectory:
    """Structural states along the solution started from an initial triple.

    The first point is exactly (phi0, x1) with x1 from :func:`build_x1`.
    """
    traj = simulate(model, grid, init, control)
    x = build_x1(model, grid, init)
    return _assemble_points(model, grid, x, traj.k, control.values)


def evolve_abstract(
    model: ModelSpec, grid: Grid, x: M2Point, control: ControlGrid
) -> StructuralTrajectory:
    """Evolve an arbitrary pair (x0, x1) under the transport recursion.

    The history terms of the concrete equation are replaced by the
    forcing (shifted x1 read at angle 0), so any x1 is admissible, not
    only images of initial triples.  When x = build_x1(init) the scalar
    component reproduces the concrete solution node by node.
    """
    grid.check_delay(model)
    control.validate(grid)
    if x.n_r != grid.n_r:
        raise ValueError(f"x1 has {x.n_r + 1} samples, grid wants {grid.n_r + 1}")
    n_r = grid.n_r
    k_fwd = _integrate(
        model.state_functional(n_r),
        model.control_functional(n_r),
        grid,
        x.x0,
        np.zeros(n_r + 1),
        np.zeros(n_r + 1),
        abstract_forcing(x.x1, n_r),
        control.values,
    )
    return _assemble_points(model, grid, x, k_fwd, control.values)


def semigroup_apply(model: ModelSpec, s: float, phi: M2Point) -> M2Point:
    """Uncontrolled flow applied to a pair read as (state, pointwise history).

    ``s`` must be a nonnegative multiple of the grid step implied by the
    sample count of ``phi.x1``.  Returns the evolved pair (z(s), window
    of z over [s - R, s]); s = 0 is the identity, and the returned window
    reads the original history below the start time, so compositions of
    flows reproduce one long run exactly.
    """
    n_r = phi.n_r
    delta = model.R / n_r
    rel = s / delta
    k = int(round(rel))
    if abs(rel - k) > 1e-9 or k < 0:
        raise ValueError(f"duration {s} is not a nonnegative grid multiple")
    if k == 0:
        return M2Point(phi.x0, phi.x1)
    grid = Grid(t=0.0, n_r=n_r, n_t=k, delta=delta)
    grid.check_delay(model)
    z_fwd = _integrate(
        model.state_functional(n_r),
        model.control_functional(n_r),
        grid,
        phi.x0,
        phi.x1,
        np.zeros(n_r + 1),
        None,
        np.zeros(k),
    )
    read = np.concatenate([phi.x1, z_fwd[1:]])
    return M2Point(z_fwd[k], read[k : k + n_r + 1])
