"""Extended-value convex functions on the line, with the machinery the
planning problems need: Fenchel conjugates, proximal points, Moreau
envelopes, the penalized Hamiltonian, and its argmax (the feedback map).

Values live in R union {+inf}; +inf propagates through sums.  Closed
forms are used for the tagged families; everything else falls back to
monotone bisection on subgradient inclusions, with bracket expansion
capped at 1e3 in magnitude (beyond the cap a supremum is declared +inf)
and bracket tolerance 1e-10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "ConvexScalarFn",
    "Quadratic",
    "LinearFn",
    "Crra",
    "LogUtility",
    "IndicatorNonneg",
    "CustomConvex",
    "absolute_value",
    "parse_tag",
    "conjugate",
    "prox",
    "moreau",
    "yosida_conjugate_check",
    "HamiltonianSpec",
    "hamiltonian",
    "feedback",
    "UnboundedFeedbackError",
    "prox_nonneg_weighted",
]

_INF = math.inf
_BRACKET_CAP = 1e3
_BRACKET_TOL = 1e-10


class UnboundedFeedbackError(ValueError):
    """The Hamiltonian supremum has no finite maximizer at this co-state."""


class ConvexScalarFn:
    """Convex, lower semicontinuous extended-value function on R.

    Subclasses provide ``__call__`` and ``subgradient`` (an interval,
    valid at interior points of the domain and at closed finite
    endpoints, where the outward side is infinite).  Conjugate, prox and
    Moreau envelope have numeric defaults and closed overrides in the
    tagged subclasses.
    """

    tag = "custom"
    domain: Tuple[float, float] = (-_INF, _INF)

    def __call__(self, c: float) -> float:
        raise NotImplementedError

    def eval_array(self, c) -> np.ndarray:
        fn = np.vectorize(self.__call__, otypes=[float])
        return fn(np.asarray(c, dtype=float))

    def subgradient(self, c: float) -> Tuple[float, float]:
        raise NotImplementedError

    def conjugate(self, p: float) -> float:
        return _conjugate_numeric(self, p)[0]

    def conjugate_argmax(self, p: float) -> Tuple[float, Optional[float]]:
        return _conjugate_numeric(self, p)

    def prox(self, n: float, x: float) -> float:
        return _prox_numeric(self, n, x)

    def moreau(self, n: float, x: float) -> float:
        y = self.prox(n, x)
        return self(y) + 0.5 * n * (y - x) ** 2

    def nonneg_sup(self, q: float) -> Tuple[float, Optional[float]]:
        """sup over c >= 0 of q*c - f(c), with its least maximizer."""
        return _conjugate_numeric(_NonnegPart(self), q)

    def penalized_sup(self, n: float, q: float) -> Tuple[float, Optional[float]]:
        """sup over c >= 0 of q*c - f(c) - c^2/(2n), with its maximizer."""
        return _conjugate_numeric(_QuadAdd(_NonnegPart(self), 1.0 / n), q)


@dataclass(frozen=True)
class Quadratic(ConvexScalarFn):
    """coeff/2 * (c - center)^2 on all of R."""

    coeff: float
    center: float = 0.0
    tag = "quadratic"

    def __post_init__(self):
        if not (np.isfinite(self.coeff) and self.coeff > 0):
            raise ValueError("quadratic coefficient must be positive")

    def __call__(self, c):
        return 0.5 * self.coeff * (c - self.center) ** 2

    def eval_array(self, c):
        c = np.asarray(c, dtype=float)
        return 0.5 * self.coeff * (c - self.center) ** 2

    def subgradient(self, c):
        g = self.coeff * (c - self.center)
        return (g, g)

    def conjugate(self, p):
        return p * self.center + p * p / (2.0 * self.coeff)

    def conjugate_argmax(self, p):
        return (self.conjugate(p), self.center + p / self.coeff)

    def prox(self, n, x):
        return (n * x + self.coeff * self.center) / (n + self.coeff)

    def nonneg_sup(self, q):
        c = max(0.0, self.center + q / self.coeff)
        return (q * c - self(c), c)

    def penalized_sup(self, n, q):
        c = max(0.0, (q + self.coeff * self.center) / (self.coeff + 1.0 / n))
        return (q * c - self(c) - c * c / (2.0 * n), c)


@dataclass(frozen=True)
class LinearFn(ConvexScalarFn):
    """slope * c on all of R (slope 0 is the zero function)."""

    slope: float = 0.0
    tag = "linear"

    def __call__(self, c):
        return self.slope * c

    def eval_array(self, c):
        return self.slope * np.asarray(c, dtype=float)

    def subgradient(self, c):
        return (self.slope, self.slope)

    def conjugate(self, p):
        return 0.0 if p == self.slope else _INF

    def conjugate_argmax(self, p):
        return (self.conjugate(p), 0.0 if p == self.slope else None)

    def prox(self, n, x):
        return x - self.slope / n

    def nonneg_sup(self, q):
        if q <= self.slope:
            return (0.0, 0.0)
        return (_INF, None)

    def penalized_sup(self, n, q):
        c = max(0.0, n * (q - self.slope))
        return (q * c - self.slope * c - c * c / (2.0 * n), c)


@dataclass(frozen=True)
class Crra(ConvexScalarFn):
    """Minimization form of a power utility: -c^(1-sigma)/(1-sigma) on c >= 0.

    For sigma > 1 this is c^(1-sigma)/(sigma-1), a positive barrier with a
    pole at 0; for sigma in (0, 1) it is negative, zero at the origin.
    sigma = 1 belongs to :class:`LogUtility`.
    """

    sigma: float
    tag = "crra"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0) or self.sigma == 1.0:
            raise ValueError("sigma must be positive and different from 1")
        object.__setattr__(self, "domain", (0.0, _INF))

    def __call__(self, c):
        if c < 0.0:
            return _INF
        if c == 0.0:
            return _INF if self.sigma > 1.0 else 0.0
        try:
            return -(c ** (1.0 - self.sigma)) / (1.0 - self.sigma)
        except OverflowError:
            return _INF

    def eval_array(self, c):
        c = np.asarray(c, dtype=float)
        out = np.full(c.shape, _INF)
        pos = c > 0.0
        out[pos] = -(c[pos] ** (1.0 - self.sigma)) / (1.0 - self.sigma)
        if self.sigma < 1.0:
            out[c == 0.0] = 0.0
        return out

    def subgradient(self, c):
        if c <= 0.0:
            raise ValueError("subgradient defined on the interior c > 0")
        try:
            g = -(c ** (-self.sigma))
        except OverflowError:
            g = -_INF
        return (g, g)

    def conjugate(self, p):
        if p < 0.0:
            return (self.sigma / (1.0 - self.sigma)) * (-p) ** (
                (self.sigma - 1.0) / self.sigma
            )
        if p == 0.0:
            return 0.0 if self.sigma > 1.0 else _INF
        return _INF

    def conjugate_argmax(self, p):
        if p < 0.0:
            return (self.conjugate(p), (-p) ** (-1.0 / self.sigma))
        return (self.conjugate(p), None)

    def prox(self, n, x):
        # root of y - y^(-sigma)/n = x on y > 0
        return _positive_root(lambda y: y - (y ** (-self.sigma)) / n - x, seed=max(x, 1.0))

    def nonneg_sup(self, q):
        return self.conjugate_argmax(q)

    def penalized_sup(self, n, q):
        # root of q + c^(-sigma) - c/n = 0, always interior
        c = _positive_root(lambda c: c / n - q - c ** (-self.sigma), seed=max(n * q, 1.0))
        return (q * c - self(c) - c * c / (2.0 * n), c)


@dataclass(frozen=True)
class LogUtility(ConvexScalarFn):
    """-log(c) on c > 0, the sigma -> 1 member of the power family."""

    tag = "log"

    def __post_init__(self):
        object.__setattr__(self, "domain", (0.0, _INF))

    def __call__(self, c):
        return -math.log(c) if c > 0.0 else _INF

    def eval_array(self, c):
        c = np.asarray(c, dtype=float)
        out = np.full(c.shape, _INF)
        pos = c > 0.0
        out[pos] = -np.log(c[pos])
        return out

    def subgradient(self, c):
        if c <= 0.0:
            raise ValueError("subgradient defined on the interior c > 0")
        return (-1.0 / c, -1.0 / c)

    def conjugate(self, p):
        return -1.0 - math.log(-p) if p < 0.0 else _INF

    def conjugate_argmax(self, p):
        if p < 0.0:
            return (self.conjugate(p), -1.0 / p)
        return (_INF, None)

    def prox(self, n, x):
        return 0.5 * (x + math.sqrt(x * x + 4.0 / n))

    def nonneg_sup(self, q):
        return self.conjugate_argmax(q)

    def penalized_sup(self, n, q):
        c = 0.5 * (q * n + math.sqrt(q * q * n * n + 4.0 * n))
        return (q * c - self(c) - c * c / (2.0 * n), c)


@dataclass(frozen=True)
class IndicatorNonneg(ConvexScalarFn):
    """0 on the half line c >= 0, +inf below."""

    tag = "indicator_nonneg"

    def __post_init__(self):
        object.__setattr__(self, "domain", (0.0, _INF))

    def __call__(self, c):
        return 0.0 if c >= 0.0 else _INF

    def eval_array(self, c):
        c = np.asarray(c, dtype=float)
        return np.where(c >= 0.0, 0.0, _INF)

    def subgradient(self, c):
        if c > 0.0:
            return (0.0, 0.0)
        if c == 0.0:
            return (-_INF, 0.0)
        raise ValueError("subgradient undefined below the domain")

    def conjugate(self, p):
        return 0.0 if p <= 0.0 else _INF

    def conjugate_argmax(self, p):
        return (self.conjugate(p), 0.0 if p <= 0.0 else None)

    def prox(self, n, x):
        return max(x, 0.0)

    def moreau(self, n, x):
        return 0.5 * n * min(x, 0.0) ** 2

    def nonneg_sup(self, q):
        return self.conjugate_argmax(q)

    def penalized_sup(self, n, q):
        c = max(0.0, n * q)
        return (q * c - c * c / (2.0 * n), c)


class CustomConvex(ConvexScalarFn):
    """Convex function given by callables, with optional closed forms."""

    def __init__(
        self,
        fn: Callable[[float], float],
        subgrad: Callable[[float], Tuple[float, float]],
        domain: Tuple[float, float] = (-_INF, _INF),
        conj: Optional[Callable[[float], float]] = None,
        prox_fn: Optional[Callable[[float, float], float]] = None,
        tag: str = "custom",
    ):
        self._fn = fn
        self._subgrad = subgrad
        self.domain = domain
        self._conj = conj
        self._prox = prox_fn
        self.tag = tag

    def __call__(self, c):
        lo, hi = self.domain
        if c < lo or c > hi:
            return _INF
        return self._fn(c)

    def subgradient(self, c):
        return self._subgrad(c)

    def conjugate(self, p):
        if self._conj is not None:
            return self._conj(p)
        return _conjugate_numeric(self, p)[0]

    def prox(self, n, x):
        if self._prox is not None:
            return self._prox(n, x)
        return _prox_numeric(self, n, x)


def absolute_value() -> CustomConvex:
    """|c| with interval subgradient, exercising the numeric pathways."""

    def sg(c):
        if c > 0.0:
            return (1.0, 1.0)
        if c < 0.0:
            return (-1.0, -1.0)
        return (-1.0, 1.0)

    return CustomConvex(fn=abs, subgrad=sg, tag="abs")


class _NonnegPart(ConvexScalarFn):
    # restriction of f to c >= 0 (the admissible-control half line)
    def __init__(self, f: ConvexScalarFn):
        self._f = f
        self.domain = (max(0.0, f.domain[0]), f.domain[1])
        self.tag = f"{f.tag}+nonneg"

    def __call__(self, c):
        return self._f(c) if c >= self.domain[0] else _INF

    def subgradient(self, c):
        if c < self.domain[0]:
            raise ValueError("subgradient undefined below the domain")
        if c == 0.0 and self._f.domain[0] < 0.0:
            return (-_INF, self._f.subgradient(0.0)[1])
        return self._f.subgradient(c)


class _QuadAdd(ConvexScalarFn):
    # f(c) + kappa * c^2 / 2
    def __init__(self, f: ConvexScalarFn, kappa: float):
        self._f = f
        self._kappa = kappa
        self.domain = f.domain
        self.tag = f"{f.tag}+quad"

    def __call__(self, c):
        v = self._f(c)
        return v if v == _INF else v + 0.5 * self._kappa * c * c

    def subgradient(self, c):
        lo, hi = self._f.subgradient(c)
        return (lo + self._kappa * c, hi + self._kappa * c)


def _positive_root(g: Callable[[float], float], seed: float = 1.0) -> float:
    """Root of an increasing function on (0, inf) by bracketed bisection."""
    lo = 1.0
    for _ in range(600):
        if g(lo) <= 0.0:
            break
        lo *= 0.5
    hi = max(seed, 1.0)
    for _ in range(600):
        if g(hi) >= 0.0:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _bisect_monotone(pos: Callable[[float], int], lo: float, hi: float) -> float:
    # invariant: pos(lo) == -1 (target to the right), pos(hi) == +1 (to the left)
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        p = pos(mid)
        if p == 0:
            return mid
        if p < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BRACKET_TOL * max(1.0, abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def _conjugate_numeric(f: ConvexScalarFn, p: float) -> Tuple[float, Optional[float]]:
    """sup_c { p*c - f(c) } by bisection on the subgradient inclusion.

    The maximizer is bracketed by walking the sign of p - subgradient;
    expansion stops at the bracket cap, beyond which the supremum is
    declared infinite.
    """
    dlo, dhi = f.domain

    def pos(c: float) -> int:
        # -1: maximizer strictly to the right of c, +1: strictly left, 0: at c
        try:
            lo_s, hi_s = f.subgradient(c)
        except ValueError:
            return -1  # only fires at the lower domain edge
        if hi_s < p:
            return -1
        if lo_s > p:
            return 1
        return 0

    # lower end of the search interval (nudged inside an open edge)
    if dlo > -_INF:
        left = dlo
        try:
            f.subgradient(left)
        except ValueError:
            left = dlo + 1e-12 * max(1.0, abs(dlo))
    else:
        left = -_BRACKET_CAP
    right = min(dhi, _BRACKET_CAP)

    p_left = pos(left)
    if p_left >= 0:
        if p_left == 0 or dlo > -_INF:
            c_star = left if dlo == -_INF else dlo
            val = p * c_star - f(c_star)
            if not np.isfinite(val):
                c_star = left
                val = p * c_star - f(c_star)
            return (val, c_star)
        return (_INF, None)  # still climbing leftward at the cap
    p_right = pos(right)
    if p_right < 0:
        if dhi > _BRACKET_CAP:
            return (_INF, None)  # still climbing rightward at the cap
        val = p * right - f(right)
        return (val, right) if np.isfinite(val) else (val, None)

    c_star = _bisect_monotone(pos, left, right)
    val = p * c_star - f(c_star)
    if not np.isfinite(val):
        c_star += 1e-12 * max(1.0, abs(c_star))
        val = p * c_star - f(c_star)
    return (val, c_star)


def _prox_numeric(f: ConvexScalarFn, n: float, x: float) -> float:
    """argmin_y { f(y) + n/2 (y - x)^2 } by bisection on the inclusion."""
    dlo, dhi = f.domain

    def pos(y: float) -> int:
        try:
            lo_s, hi_s = f.subgradient(y)
        except ValueError:
            return -1  # only fires at the lower domain edge
        if hi_s + n * (y - x) < 0.0:
            return -1
        if lo_s + n * (y - x) > 0.0:
            return 1
        return 0

    if dlo > -_INF:
        lo = dlo
        try:
            p_lo = pos(dlo)
        except ValueError:
            p_lo = -1
        if p_lo == 0:
            return dlo
        if p_lo > 0:
            return dlo  # inclusion already positive at the edge: boundary point
        if not np.isfinite(f(dlo)):
            lo = dlo + 1e-300
    else:
        lo = x
        step = max(1.0, abs(x)) * 1e-3
        for _ in range(600):
            if pos(lo) <= 0:
                break
            lo -= step
            step *= 2.0
    hi = max(x, lo)
    step = max(1.0, abs(x)) * 1e-3
    for _ in range(600):
        if pos(hi) >= 0:
            break
        hi = min(hi + step, dhi)
        step *= 2.0
    if pos(lo) == 0:
        return lo
    return _bisect_monotone(pos, lo, hi)


def conjugate(f: ConvexScalarFn, p: float) -> float:
    """Fenchel conjugate sup_c { p*c - f(c) }, extended valued."""
    return f.conjugate(p)


def prox(f: ConvexScalarFn, n: float, x: float) -> float:
    """Unique minimizer of f(y) + n/2 |y - x|^2 (n >= 1)."""
    if n < 1.0:
        raise ValueError("penalization index n must be >= 1")
    return f.prox(n, x)


def moreau(f: ConvexScalarFn, n: float, x: float) -> float:
    """Value of the quadratic inf-convolution at x."""
    if n < 1.0:
        raise ValueError("penalization index n must be >= 1")
    return f.moreau(n, x)


def yosida_conjugate_check(f: ConvexScalarFn, n: float, p_grid) -> float:
    """Max gap between the conjugate of the envelope and f* + |.|^2/(2n).

    The left side goes through the numeric conjugate of the smoothed
    function; the right side uses f's own conjugate.  Grid points where
    the right side is infinite are skipped.
    """
    env = CustomConvex(
        fn=lambda y: f.moreau(n, y),
        subgrad=lambda y: _envelope_slope(f, n, y),
        tag=f"moreau({f.tag})",
    )
    worst = 0.0
    for p in np.asarray(p_grid, dtype=float):
        right = f.conjugate(float(p)) + p * p / (2.0 * n)
        if not np.isfinite(right):
            continue
        left = env.conjugate(float(p))
        worst = max(worst, abs(left - right))
    return worst


def _envelope_slope(f: ConvexScalarFn, n: float, y: float) -> Tuple[float, float]:
    g = n * (y - f.prox(n, y))
    return (g, g)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Running cost h, discount rho, and optional penalization index n."""

    h: ConvexScalarFn
    rho: float = 0.0
    n: Optional[float] = None

    def __post_init__(self):
        if self.rho < 0.0 or not np.isfinite(self.rho):
            raise ValueError("rho must be nonnegative and finite")
        if self.n is not None and self.n < 1.0:
            raise ValueError("penalization index n must be >= 1 when finite")


def _sup_pair(spec: HamiltonianSpec, t: float, Lp: float):
    q = -math.exp(spec.rho * t) * Lp
    if spec.n is None:
        return spec.h.nonneg_sup(q)
    return spec.h.penalized_sup(spec.n, q)


def hamiltonian(spec: HamiltonianSpec, t: float, Lp: float) -> float:
    """exp(-rho t) * sup_{c>=0} { -exp(rho t) Lp c - h(c) [- c^2/(2n)] }.

    ``Lp`` is the co-state paired with the model's control functional,
    computed by the caller.  Extended valued: the unpenalized supremum may
    be +inf.
    """
    val, _ = _sup_pair(spec, t, Lp)
    if not np.isfinite(val):
        return _INF if val > 0 else val
    return math.exp(-spec.rho * t) * val


def feedback(spec: HamiltonianSpec, t: float, Lp: float) -> float:
    """Least maximizer of the supremum defining the Hamiltonian.

    Raises :class:`UnboundedFeedbackError` when no finite maximizer exists
    (for instance a power utility with nonpositive marginal price and no
    penalization).
    """
    val, arg = _sup_pair(spec, t, Lp)
    if arg is None or not np.isfinite(val):
        raise UnboundedFeedbackError(
            f"no finite maximizer at t={t}, Lp={Lp} (supremum {val})"
        )
    return float(arg)


def prox_nonneg_weighted(h: ConvexScalarFn, weights, z) -> np.ndarray:
    """Vectorized argmin_{y>=0} w_i h(y) + (y - z_i)^2 / 2, per coordinate.

    This is the solver's inner step; the tagged families resolve in closed
    form or by a guarded Newton iteration, anything else drops to the
    scalar bisection.
    """
    w = np.asarray(weights, dtype=float)
    z = np.asarray(z, dtype=float)
    if isinstance(h, Quadratic):
        return np.maximum(0.0, (z + w * h.coeff * h.center) / (1.0 + w * h.coeff))
    if isinstance(h, LinearFn):
        return np.maximum(0.0, z - w * h.slope)
    if isinstance(h, IndicatorNonneg):
        return np.maximum(z, 0.0)
    if isinstance(h, LogUtility):
        return 0.5 * (z + np.sqrt(z * z + 4.0 * w))
    if isinstance(h, Crra):
        # root of y - w y^(-sigma) = z on y > 0; the map is increasing and
        # concave there, so Newton from the left stays on the positive
        # branch and increases monotonically
        sigma = h.sigma
        y = np.maximum(z, np.power(w, 1.0 / (1.0 + sigma)))
        for _ in range(600):
            high = y - w * np.power(y, -sigma) - z > 0.0
            if not np.any(high):
                break
            y = np.where(high, 0.5 * y, y)
        for _ in range(200):
            g = y - w * np.power(y, -sigma) - z
            gp = 1.0 + w * sigma * np.power(y, -sigma - 1.0)
            y = y - g / gp
            if np.max(np.abs(g)) <= 1e-14 * (1.0 + np.max(np.abs(z))):
                break
        return y
    out = np.empty_like(z)
    flat_w = np.broadcast_to(w, z.shape).reshape(-1)
    flat_z = z.reshape(-1)
    flat_o = out.reshape(-1)
    for i in range(flat_z.size):
        g = _QuadAdd(_NonnegPart(_Scaled(h, flat_w[i])), 0.0)
        flat_o[i] = _prox_numeric(g, 1.0, flat_z[i])
    return out


class _Scaled(ConvexScalarFn):
    def __init__(self, f: ConvexScalarFn, w: float):
        self._f = f
        self._w = w
        self.domain = f.domain
        self.tag = f"{w}*{f.tag}"

    def __call__(self, c):
        v = self._f(c)
        return v if v == _INF else self._w * v

    def subgradient(self, c):
        lo, hi = self._f.subgradient(c)
        return (self._w * lo, self._w * hi)


def parse_tag(tag: str) -> ConvexScalarFn:
    """Resolve a configuration tag into a convex function.

    Accepted forms: ``crra:S`` (S = 1 maps to ``log``), ``log``,
    ``quadratic:Q`` or ``quadratic:Q:CENTER``, ``linear:M``,
    ``indicator_nonneg``, ``abs``, ``zero``.
    """
    parts = tag.strip().split(":")
    name = parts[0].lower()
    args = [float(p) for p in parts[1:]]
    if name == "crra":
        if len(args) != 1:
            raise ValueError(f"tag {tag!r}: crra takes one parameter")
        if args[0] == 1.0:
            return LogUtility()
        return Crra(args[0])
    if name == "log":
        return LogUtility()
    if name == "quadratic":
        if len(args) == 1:
            return Quadratic(args[0])
        if len(args) == 2:
            return Quadratic(args[0], args[1])
        raise ValueError(f"tag {tag!r}: quadratic takes one or two parameters")
    if name == "linear":
        if len(args) != 1:
            raise ValueError(f"tag {tag!r}: linear takes one parameter")
        return LinearFn(args[0])
    if name == "indicator_nonneg":
        return IndicatorNonneg()
    if name == "abs":
        return absolute_value()
    if name == "zero":
        return LinearFn(0.0)
    raise ValueError(f"unknown convex function tag {tag!r}")
