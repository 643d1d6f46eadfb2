import numpy as np
import pytest

from delayoc import (
    Crra,
    Grid,
    LinearFn,
    M2Point,
    ModelSpec,
    ObjectiveSpec,
    Quadratic,
)


@pytest.fixture(scope="session")
def ak_model():
    return ModelSpec(kind="AK", a=0.3, R=1.0, rho=0.05)


@pytest.fixture(scope="session")
def ak_grid(ak_model):
    return Grid.for_model(ak_model, 0.0, 2.0, 20)


@pytest.fixture(scope="session")
def crra_spec(ak_model, ak_grid):
    """Power-utility planning reference: interior optimum, separable-ish."""
    return ObjectiveSpec(
        model=ak_model,
        grid=ak_grid,
        running=Crra(2.0),
        terminal=LinearFn(-1.0),
        n=8.0,
        tol=1e-9,
    )


@pytest.fixture(scope="session")
def crra_x(ak_grid):
    return M2Point(5.0, np.zeros(ak_grid.n_r + 1))


@pytest.fixture(scope="session")
def lq_model():
    return ModelSpec(kind="AK", a=0.3, R=1.0, rho=0.1)


@pytest.fixture(scope="session")
def lq_spec(lq_model):
    """Quadratic instance on the full horizon, state constraint inactive."""
    grid = Grid.for_model(lq_model, 0.0, 2.0, 20)
    return ObjectiveSpec(
        model=lq_model,
        grid=grid,
        running=Quadratic(1.0),
        terminal=Quadratic(4.0, 0.8),
        n=8.0,
        tol=1e-10,
    )


@pytest.fixture(scope="session")
def lq_short_spec(lq_model):
    """Horizon shorter than the delay: smooth value, no echo kink."""
    grid = Grid.for_model(lq_model, 0.0, 0.8, 20)
    return ObjectiveSpec(
        model=lq_model,
        grid=grid,
        running=Quadratic(1.0),
        terminal=Quadratic(4.0, 0.8),
        n=8.0,
        tol=1e-10,
    )


@pytest.fixture(scope="session")
def lq_x():
    theta = np.linspace(-1.0, 0.0, 21)
    return M2Point(1.0, 0.1 * np.sin(3.0 * (theta + 1.0)))


@pytest.fixture(scope="session")
def adv_model():
    n_r = 20
    return ModelSpec(
        kind="Advertising",
        R=1.0,
        rho=0.0,
        a0=-0.1,
        a1_density=np.full(n_r + 1, -0.05),
        b0=0.5,
        b1_density=np.full(n_r + 1, 0.5),
        h0="quadratic:1",
        phi0="linear:-1",
    )


@pytest.fixture(scope="session")
def adv_spec(adv_model):
    grid = Grid.for_model(adv_model, 0.0, 2.0, 20)
    return ObjectiveSpec(
        model=adv_model,
        grid=grid,
        running=Quadratic(1.0),
        terminal=LinearFn(-1.0),
        n=8.0,
        tol=1e-9,
    )


@pytest.fixture(scope="session")
def adv_x(adv_spec):
    return M2Point(1.0, np.zeros(adv_spec.grid.n_r + 1))
