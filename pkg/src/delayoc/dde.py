"""Controlled linear delay differential equations by the method of steps.

Two model families are supported, both scalar and linear with a single
delay length R:

* a vintage-capital accumulation law
      dk/ds = a*k(s) - a*k(s-R) - c(s) + c(s-R)
* a goodwill law with distributed delays
      dg/ds = a0*g(s) + int g(s+xi) a1(xi) dxi + b0*z(s) + int z(s+xi) b1(xi) dxi

Both right-hand sides are instances of one abstraction: a point mass at 0,
a point mass at -R, and an L2 density on [-R, 0], applied to the running
state segment and to the running control segment.  Everything here works
on a delay-aligned grid (step = R / n_r), so every delayed lookup lands
exactly on a node and the method of steps incurs no interpolation error.

Grid conventions, used consistently across the package:

* a "history" array holds n_r + 1 samples at theta = -R, -R+delta, ..., 0;
* a "full path" on [t-R, T] holds n_r + n_t + 1 samples; index n_r is the
  node at time t and belongs to the forward part;
* delayed state lookups read the closed history (evaluation times up to
  and including t + R) and the computed path after; delayed control
  lookups switch to the forward control already at t, since piecewise
  constant controls are right continuous;
* the nodal reading of a control at forward node j is the value of step
  min(j, n_t - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "HistoryFunctional",
    "ModelSpec",
    "Grid",
    "InitialTriple",
    "ControlGrid",
    "Trajectory",
    "EstimateReport",
    "simulate",
    "apply_history_functional",
    "segment_extract",
    "extend_plus",
    "extend_minus",
    "estimate_check",
    "trapezoid",
    "trapezoid_weights",
]


def _freeze(values, size: Optional[int] = None, name: str = "array") -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if size is not None and arr.size != size:
        raise ValueError(f"{name}: expected {size} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    arr.setflags(write=False)
    return arr


def trapezoid(values: np.ndarray, dx: float) -> float:
    """Trapezoid quadrature of nodal samples with uniform spacing."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(dx * (values.sum() - 0.5 * (values[0] + values[-1])))


def trapezoid_weights(n_nodes: int, dx: float) -> np.ndarray:
    """Quadrature weights of the trapezoid rule on a uniform grid."""
    w = np.full(n_nodes, dx, dtype=float)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def trapezoid_norm(values: np.ndarray, dx: float) -> float:
    """L2 norm of nodal samples under the trapezoid inner product."""
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(trapezoid(values * values, dx)))


@dataclass(frozen=True, eq=False)
class HistoryFunctional:
    """Continuous linear functional on history segments.

    Acts on an (n_r + 1)-sample segment u over [-R, 0] as

        c0 * u(0) + cR * u(-R) + trapezoid(density * u)

    ``density`` is a sampled L2 density on the same nodes; ``None`` means
    no distributed part.
    """

    c0: float = 0.0
    cR: float = 0.0
    density: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (np.isfinite(self.c0) and np.isfinite(self.cR)):
            raise ValueError("HistoryFunctional coefficients must be finite")
        if self.density is not None:
            object.__setattr__(self, "density", _freeze(self.density, name="density"))

    def n_nodes(self) -> Optional[int]:
        return None if self.density is None else int(self.density.size)


def apply_history_functional(f: HistoryFunctional, segment, delta: float) -> float:
    """Apply ``f`` to a sampled history segment.

    The point-mass parts read the segment endpoints; the density part is
    integrated by the trapezoid rule with spacing ``delta``.
    """
    seg = np.asarray(segment, dtype=float).reshape(-1)
    if f.density is not None and f.density.size != seg.size:
        raise ValueError(
            f"segment has {seg.size} samples but density has {f.density.size}"
        )
    out = f.c0 * seg[-1] + f.cR * seg[0]
    if f.density is not None:
        out += trapezoid(f.density * seg, delta)
    return float(out)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Parameters of one controlled delay model.

    ``kind`` is ``"AK"`` (two-point functionals, productivity ``a``) or
    ``"Advertising"`` (deterioration ``a0 <= 0``, forgetting density
    ``a1_density``, effectiveness ``b0 >= 0``, lag density
    ``b1_density >= 0``).  ``h0`` and ``phi0`` are convex-function tags
    understood by :mod:`delayoc.convex` (running cost and terminal cost of
    the minimization form of the planning problem).
    """

    kind: str
    R: float
    rho: float = 0.0
    a: Optional[float] = None
    a0: Optional[float] = None
    a1_density: Optional[np.ndarray] = None
    b0: Optional[float] = None
    b1_density: Optional[np.ndarray] = None
    h0: str = "quadratic:1"
    phi0: str = "zero"

    def __post_init__(self):
        if self.kind not in ("AK", "Advertising"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValueError("R must be positive and finite")
        if not (np.isfinite(self.rho) and self.rho >= 0):
            raise ValueError("rho must be nonnegative and finite")
        if self.kind == "AK":
            if self.a is None or not (np.isfinite(self.a) and self.a > 0):
                raise ValueError("AK model requires a > 0")
        else:
            if self.a0 is None or not (np.isfinite(self.a0) and self.a0 <= 0):
                raise ValueError("Advertising model requires a0 <= 0")
            if self.b0 is None or not (np.isfinite(self.b0) and self.b0 >= 0):
                raise ValueError("Advertising model requires b0 >= 0")
            if self.a1_density is not None:
                object.__setattr__(
                    self, "a1_density", _freeze(self.a1_density, name="a1_density")
                )
            if self.b1_density is not None:
                b1 = _freeze(self.b1_density, name="b1_density")
                if np.any(b1 < 0):
                    raise ValueError("b1_density must be nonnegative")
                object.__setattr__(self, "b1_density", b1)

    def state_functional(self, n_r: int) -> HistoryFunctional:
        """Functional applied to the running state segment."""
        if self.kind == "AK":
            return HistoryFunctional(c0=self.a, cR=-self.a)
        dens = self._density(self.a1_density, n_r)
        return HistoryFunctional(c0=self.a0, cR=0.0, density=dens)

    def control_functional(self, n_r: int) -> HistoryFunctional:
        """Functional applied to the running control segment.

        This is also the pairing applied to co-states when forming the
        Hamiltonian argument.
        """
        if self.kind == "AK":
            return HistoryFunctional(c0=-1.0, cR=1.0)
        dens = self._density(self.b1_density, n_r)
        return HistoryFunctional(c0=self.b0, cR=0.0, density=dens)

    def output_factor(self) -> float:
        return self.a if self.kind == "AK" else 1.0

    def _density(self, density, n_r: int) -> Optional[np.ndarray]:
        if density is None:
            return None
        if density.size != n_r + 1:
            raise ValueError(
                f"density sampled at {density.size} nodes, grid wants {n_r + 1}"
            )
        return density


@dataclass(frozen=True)
class Grid:
    """Delay-aligned uniform grid: delta = R / n_r, horizon t + n_t * delta."""

    t: float
    n_r: int
    n_t: int
    delta: float

    def __post_init__(self):
        if self.n_r < 2:
            raise ValueError("n_r must be at least 2")
        if self.n_t < 0:
            raise ValueError("n_t must be nonnegative")
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise ValueError("delta must be positive")

    @classmethod
    def for_model(cls, model: ModelSpec, t: float, horizon: float, n_r: int) -> "Grid":
        if horizon <= t:
            raise ValueError("horizon must exceed the initial time")
        delta = model.R / n_r
        n_t = int(round((horizon - t) / delta))
        if n_t < 1 or abs(t + n_t * delta - horizon) > 1e-9 * max(1.0, abs(horizon)):
            raise ValueError(
                f"delta={delta} does not divide the horizon length {horizon - t}"
            )
        return cls(t=t, n_r=n_r, n_t=n_t, delta=delta)

    @property
    def horizon(self) -> float:
        return self.t + self.n_t * self.delta

    def forward_times(self) -> np.ndarray:
        return self.t + self.delta * np.arange(self.n_t + 1)

    def node_of(self, s: float, what: str = "time") -> int:
        """Forward node index of ``s``; raises if off-grid or outside [t, T]."""
        j = (s - self.t) / self.delta
        k = int(round(j))
        if abs(j - k) > 1e-9 or k < 0 or k > self.n_t:
            raise ValueError(f"{what} {s} is off-grid or outside [{self.t}, {self.horizon}]")
        return k

    def check_delay(self, model: ModelSpec) -> None:
        if abs(self.delta * self.n_r - model.R) > 1e-12 * max(1.0, model.R):
            raise ValueError("grid step does not divide the delay length")

    def advanced(self, steps: int) -> "Grid":
        """Same horizon, initial time moved forward by ``steps`` nodes."""
        if steps < 0 or steps > self.n_t:
            raise ValueError("cannot advance past the horizon")
        return Grid(self.t + steps * self.delta, self.n_r, self.n_t - steps, self.delta)


@dataclass(frozen=True, eq=False)
class InitialTriple:
    """Initial datum (phi0, phi1, omega): state, state history, control history."""

    phi0: float
    phi1: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.phi0):
            raise ValueError("phi0 must be finite")
        object.__setattr__(self, "phi1", _freeze(self.phi1, name="phi1"))
        object.__setattr__(self, "omega", _freeze(self.omega, name="omega"))

    def validate(self, model: ModelSpec, grid: Grid) -> None:
        n = grid.n_r + 1
        if self.phi1.size != n:
            raise ValueError(f"phi1: expected {n} samples, got {self.phi1.size}")
        if self.omega.size != n:
            raise ValueError(f"omega: expected {n} samples, got {self.omega.size}")
        if model.kind == "Advertising":
            if np.any(self.phi1 < 0) or np.any(self.omega < 0):
                raise ValueError("Advertising histories must be nonnegative")
            if abs(self.phi1[-1] - self.phi0) > 1e-12 * max(1.0, abs(self.phi0)):
                raise ValueError("Advertising requires phi1(0) == phi0")


@dataclass(frozen=True, eq=False)
class ControlGrid:
    """Piecewise-constant control: values[k] on [t + k*delta, t + (k+1)*delta)."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values, name="control values"))

    @classmethod
    def constant(cls, level: float, n_t: int) -> "ControlGrid":
        return cls(np.full(n_t, level))

    def validate(self, grid: Grid) -> None:
        if self.values.size != grid.n_t:
            raise ValueError(
                f"control: expected {grid.n_t} step values, got {self.values.size}"
            )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State samples at forward nodes, derivative estimates, and output a*k."""

    k: np.ndarray
    kdot: np.ndarray
    output: np.ndarray


@dataclass(frozen=True)
class EstimateReport:
    sup_norm_k: float
    data_norm: float
    ratio: float


def _integrate(
    state_f: HistoryFunctional,
    ctrl_f: HistoryFunctional,
    grid: Grid,
    x0: float,
    hist_state: np.ndarray,
    hist_ctrl: np.ndarray,
    forcing: Optional[np.ndarray],
    values: np.ndarray,
) -> np.ndarray:
    """Heun integration of the delayed dynamics on the aligned grid.

    ``hist_state`` holds the n_r + 1 closed history nodes of the state:
    delayed state lookups at evaluation times up to and including t + R
    read them, later lookups read the computed path.  Delayed control
    lookups switch to the forward control already at t (piecewise
    constant controls are right continuous), so the closing node of
    ``hist_ctrl`` is never consulted.  ``forcing``, when given (n_r + 1
    values), is added at evaluation nodes j <= n_r and carries the
    aggregated history of an abstract initial pair.  Returns the forward
    state samples; the sample at t is x0 regardless of the history's
    closing node.
    """
    n_r, n_t, delta = grid.n_r, grid.n_t, grid.delta
    read = np.zeros(n_r + n_t + 1)
    read[: n_r + 1] = hist_state
    cread = np.zeros(n_r + n_t + 1)
    cread[:n_r] = hist_ctrl[:n_r]
    if n_t > 0:
        idx = np.minimum(np.arange(n_t + 1), n_t - 1)
        cread[n_r:] = values[idx]
    state = np.zeros(n_t + 1)
    state[0] = x0

    sd = state_f.density
    cd = ctrl_f.density
    half = 0.5 * delta

    def stage(j: int, v: float, step: int) -> float:
        # right-hand side at forward node j; the windows close on the
        # current unknowns: the stage value v for the state (the stored
        # node is not yet written at the corrector stage) and the running
        # step's control value (the step ends before the next one starts)
        acc = state_f.c0 * v + state_f.cR * read[j]
        if sd is not None:
            prod = sd[:-1] * read[j : j + n_r]
            acc += delta * (prod.sum() - 0.5 * prod[0]) + half * sd[-1] * v
        acc += ctrl_f.c0 * values[step] + ctrl_f.cR * cread[j]
        if cd is not None:
            cprod = cd[:-1] * cread[j : j + n_r]
            acc += delta * (cprod.sum() - 0.5 * cprod[0]) + half * cd[-1] * values[step]
        if forcing is not None and j <= n_r:
            acc += forcing[j]
        return acc

    for k in range(n_t):
        v = state[k]
        f_left = stage(k, v, k)
        pred = v + delta * f_left
        f_right = stage(k + 1, pred, k)
        nxt = v + half * (f_left + f_right)
        state[k + 1] = nxt
        read[n_r + k + 1] = nxt
    return state


def _derivative_estimates(
    state_f: HistoryFunctional,
    ctrl_f: HistoryFunctional,
    grid: Grid,
    k_fwd: np.ndarray,
    hist_state: np.ndarray,
    hist_ctrl: np.ndarray,
    forcing: Optional[np.ndarray],
    values: np.ndarray,
) -> np.ndarray:
    n_r, n_t, delta = grid.n_r, grid.n_t, grid.delta
    read = np.concatenate([hist_state, k_fwd[1:]])
    cread = np.zeros(n_r + n_t + 1)
    cread[:n_r] = hist_ctrl[:n_r]
    if n_t > 0:
        idx = np.minimum(np.arange(n_t + 1), n_t - 1)
        cread[n_r:] = values[idx]
    half = 0.5 * delta
    out = np.empty(n_t + 1)
    for j in range(n_t + 1):
        v = k_fwd[j]
        step = min(j, n_t - 1) if n_t > 0 else 0
        acc = state_f.c0 * v + state_f.cR * read[j]
        if state_f.density is not None:
            sd = state_f.density
            prod = sd[:-1] * read[j : j + n_r]
            acc += delta * (prod.sum() - 0.5 * prod[0]) + half * sd[-1] * v
        step_value = values[step] if n_t > 0 else 0.0
        acc += ctrl_f.c0 * step_value
        acc += ctrl_f.cR * cread[j]
        if ctrl_f.density is not None:
            cd = ctrl_f.density
            cprod = cd[:-1] * cread[j : j + n_r]
            acc += delta * (cprod.sum() - 0.5 * cprod[0]) + half * cd[-1] * step_value
        if forcing is not None and j <= n_r:
            acc += forcing[j]
        out[j] = acc
    return out


def simulate(
    model: ModelSpec, grid: Grid, init: InitialTriple, control: ControlGrid
) -> Trajectory:
    """Solve the controlled delay equation forward from the given triple.

    The returned state samples start at ``init.phi0`` (the history value
    phi1(0) is only consulted by delayed lookups).  The map
    (init, control) -> trajectory is affine, and exactly linear in the
    data tuple.
    """
    grid.check_delay(model)
    init.validate(model, grid)
    control.validate(grid)
    state_f = model.state_functional(grid.n_r)
    ctrl_f = model.control_functional(grid.n_r)
    k_fwd = _integrate(
        state_f, ctrl_f, grid, init.phi0, init.phi1, init.omega, None, control.values
    )
    kdot = _derivative_estimates(
        state_f, ctrl_f, grid, k_fwd, init.phi1, init.omega, None, control.values
    )
    return Trajectory(k=k_fwd, kdot=kdot, output=model.output_factor() * k_fwd)


def segment_extract(path, grid: Grid, s: float) -> np.ndarray:
    """Window [s - R, s] of a full sampled path on [t - R, T]."""
    full = np.asarray(path, dtype=float).reshape(-1)
    expected = grid.n_r + grid.n_t + 1
    if full.size != expected:
        raise ValueError(f"path: expected {expected} samples, got {full.size}")
    j = grid.node_of(s, "segment time")
    return full[j : j + grid.n_r + 1].copy()


def extend_plus(forward, grid: Grid) -> np.ndarray:
    """Zero-pad a forward path on [t, T] back to [t - R, T]."""
    fwd = np.asarray(forward, dtype=float).reshape(-1)
    if fwd.size != grid.n_t + 1:
        raise ValueError(f"forward path: expected {grid.n_t + 1} samples, got {fwd.size}")
    return np.concatenate([np.zeros(grid.n_r), fwd])


def extend_minus(history, grid: Grid) -> np.ndarray:
    """Place a history on [t - R, t) and zero-fill on [t, T].

    The node at time t belongs to the forward part, so the history's
    closing sample is not written; extend_plus + extend_minus of the two
    restrictions of a full path reproduce it exactly.
    """
    hist = np.asarray(history, dtype=float).reshape(-1)
    if hist.size != grid.n_r + 1:
        raise ValueError(f"history: expected {grid.n_r + 1} samples, got {hist.size}")
    out = np.zeros(grid.n_r + grid.n_t + 1)
    out[: grid.n_r] = hist[: grid.n_r]
    return out


def estimate_check(
    model: ModelSpec, grid: Grid, init: InitialTriple, control: ControlGrid
) -> EstimateReport:
    """Sup norm of the trajectory against the norm of the data.

    The data norm is |phi0| + |phi1|_L2 + |omega|_L2 + |c|_L2 (trapezoid
    norms for histories, exact step norm for the piecewise-constant
    control).  The ratio is scale invariant because the equation is
    linear; all-zero data reports ratio 0 by convention.
    """
    traj = simulate(model, grid, init, control)
    sup = float(np.max(np.abs(traj.k)))
    data = (
        abs(init.phi0)
        + trapezoid_norm(init.phi1, grid.delta)
        + trapezoid_norm(init.omega, grid.delta)
        + float(np.sqrt(grid.delta * np.sum(control.values**2)))
    )
    ratio = 0.0 if data == 0.0 else sup / data
    return EstimateReport(sup_norm_k=sup, data_norm=data, ratio=ratio)
