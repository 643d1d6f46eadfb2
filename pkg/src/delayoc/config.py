"""Flat key=value run configuration with dotted section prefixes.

Example::

    model.kind = AK
    model.a = 0.3
    model.R = 1.0
    model.rho = 0.05
    model.h0 = crra:2
    model.phi0 = linear:-1
    grid.t = 0.0
    grid.T = 2.0
    grid.nR = 20
    solver.tol = 1e-8
    solver.nlist = 1,2,4,8,16,32

Histories and pair data arrive as single-column CSV files (one float per
line).  All parse errors name the offending key and line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .convex import parse_tag
from .dde import Grid, InitialTriple, ModelSpec
from .structural import M2Point
from .value import DEFAULT_BETA_SCHEDULE, ObjectiveSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "build_model",
    "build_grid",
    "build_objective",
    "read_column",
    "read_initial_triple",
    "read_m2_point",
    "format_value",
]

_KNOWN_KEYS = {
    "model.kind",
    "model.a",
    "model.R",
    "model.rho",
    "model.a0",
    "model.a1",
    "model.b0",
    "model.b1",
    "model.h0",
    "model.phi0",
    "grid.t",
    "grid.T",
    "grid.nR",
    "solver.tol",
    "solver.maxIter",
    "solver.beta",
    "solver.nlist",
    "solver.n",
    "solver.constraint",
    "simulate.c",
}


class ConfigError(ValueError):
    """Malformed configuration; the message names the key and location."""


@dataclass
class RunConfig:
    path: str
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def where(self, key: str) -> str:
        line = self.lines.get(key)
        return f"{self.path}:{line}" if line else self.path

    def raw(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"{self.path}: missing required key {key!r}")
        return self.values[key]

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        if key not in self.values:
            return default
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{self.where(key)}: key {key!r}: {exc}") from None

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        if key not in self.values:
            return default
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{self.where(key)}: key {key!r}: {exc}") from None

    def get_list(self, key: str, default=None):
        if key not in self.values:
            return default
        try:
            return [float(v) for v in self.values[key].split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"{self.where(key)}: key {key!r}: {exc}") from None


def parse_config(path) -> RunConfig:
    path = str(path)
    cfg = RunConfig(path=path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in cfg.values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{path}:{lineno}: key {key!r} has no value")
        cfg.values[key] = value
        cfg.lines[key] = lineno
    return cfg


def build_model(cfg: RunConfig, n_r: int) -> ModelSpec:
    kind = cfg.require("model.kind")
    try:
        if kind == "AK":
            return ModelSpec(
                kind="AK",
                a=cfg.get_float("model.a"),
                R=cfg.get_float("model.R"),
                rho=cfg.get_float("model.rho", 0.0),
                h0=cfg.raw("model.h0", "quadratic:1"),
                phi0=cfg.raw("model.phi0", "zero"),
            )
        if kind == "Advertising":
            a1 = cfg.get_float("model.a1")
            b1 = cfg.get_float("model.b1")
            return ModelSpec(
                kind="Advertising",
                R=cfg.get_float("model.R"),
                rho=cfg.get_float("model.rho", 0.0),
                a0=cfg.get_float("model.a0", 0.0),
                a1_density=None if a1 is None else np.full(n_r + 1, a1),
                b0=cfg.get_float("model.b0", 0.0),
                b1_density=None if b1 is None else np.full(n_r + 1, b1),
                h0=cfg.raw("model.h0", "quadratic:1"),
                phi0=cfg.raw("model.phi0", "zero"),
            )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{cfg.path}: model block: {exc}") from None
    raise ConfigError(
        f"{cfg.where('model.kind')}: key 'model.kind': expected AK or Advertising, got {kind!r}"
    )


def build_grid(cfg: RunConfig, model: ModelSpec) -> Grid:
    n_r = cfg.get_int("grid.nR")
    if n_r is None:
        raise ConfigError(f"{cfg.path}: missing required key 'grid.nR'")
    t = cfg.get_float("grid.t", 0.0)
    horizon = cfg.get_float("grid.T")
    if horizon is None:
        raise ConfigError(f"{cfg.path}: missing required key 'grid.T'")
    try:
        return Grid.for_model(model, t, horizon, n_r)
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: grid block: {exc}") from None


def build_objective(
    cfg: RunConfig, model: ModelSpec, grid: Grid, n: Optional[float] = None
) -> ObjectiveSpec:
    try:
        running = parse_tag(model.h0)
        terminal = parse_tag(model.phi0)
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: convex tag: {exc}") from None
    beta = cfg.get_list("solver.beta", list(DEFAULT_BETA_SCHEDULE))
    try:
        return ObjectiveSpec(
            model=model,
            grid=grid,
            running=running,
            terminal=terminal,
            n=n if n is not None else cfg.get_float("solver.n"),
            constraint_mode=cfg.raw("solver.constraint", "penalty"),
            tol=cfg.get_float("solver.tol", 1e-8),
            max_iter=cfg.get_int("solver.maxIter", 20000),
            beta_schedule=tuple(beta),
        )
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: solver block: {exc}") from None


def read_column(path) -> np.ndarray:
    """Single-column CSV: one float per nonblank line."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read data file: {exc}") from None
    out = []
    for lineno, raw in enumerate(lines, start=1):
        s = raw.strip()
        if not s:
            continue
        try:
            out.append(float(s))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a number: {raw!r}") from None
    return np.array(out)


def read_initial_triple(path, n_r: int) -> InitialTriple:
    """File layout: phi0, then n_r+1 state-history nodes, then n_r+1
    control-history nodes, one value per line."""
    col = read_column(path)
    want = 1 + 2 * (n_r + 1)
    if col.size != want:
        raise ConfigError(
            f"{path}: initial triple needs {want} values "
            f"(1 + 2*(nR+1)), got {col.size}"
        )
    return InitialTriple(
        phi0=float(col[0]),
        phi1=col[1 : n_r + 2],
        omega=col[n_r + 2 :],
    )


def read_m2_point(path, n_r: int) -> M2Point:
    """File layout: x0 then n_r+1 nodes of x1, one value per line."""
    col = read_column(path)
    want = n_r + 2
    if col.size != want:
        raise ConfigError(
            f"{path}: pair data needs {want} values (1 + nR+1), got {col.size}"
        )
    return M2Point(x0=float(col[0]), x1=col[1:])


def format_value(v: float) -> str:
    """17 significant digits so round trips and golden files are exact."""
    return f"{v:.17g}"
