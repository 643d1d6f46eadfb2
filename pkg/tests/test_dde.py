import numpy as np
import pytest

from delayoc import (
    ControlGrid,
    Grid,
    HistoryFunctional,
    InitialTriple,
    ModelSpec,
    apply_history_functional,
    estimate_check,
    extend_minus,
    extend_plus,
    segment_extract,
    simulate,
)


def euler_oracle(a, R, T, phi0, phi1, omega, c_values, n_r):
    """Independent method-of-steps check: explicit Euler on a fine grid.

    Takes closed-form data functions so it can run at any resolution.
    """
    delta = R / n_r
    n_t = int(round(T / delta))
    theta = np.linspace(-R, 0.0, n_r + 1)
    hist = np.array([phi1(v) for v in theta])
    whist = np.array([omega(v) for v in theta])
    read = np.zeros(n_r + n_t + 1)
    read[: n_r + 1] = hist
    k = np.zeros(n_t + 1)
    k[0] = phi0
    cv = np.array([c_values(j * delta) for j in range(n_t)])
    for j in range(n_t):
        cdel = whist[j] if j < n_r else cv[j - n_r]
        k[j + 1] = k[j] + delta * (a * k[j] - a * read[j] - cv[j] + cdel)
        read[n_r + j + 1] = k[j + 1]
    return k


def make_ak(a=0.3, horizon=2.0, n_r=20, rho=0.0):
    model = ModelSpec(kind="AK", a=a, R=1.0, rho=rho)
    return model, Grid.for_model(model, 0.0, horizon, n_r)


class TestSimulate:
    def test_first_interval_closed_form(self):
        # with zero history and zero control the delay terms vanish and
        # k(s) = exp(a s) on the first delay span
        model, grid = make_ak(a=0.5, horizon=1.0, n_r=50)
        init = InitialTriple(1.0, np.zeros(51), np.zeros(51))
        traj = simulate(model, grid, init, ControlGrid(np.zeros(grid.n_t)))
        err = np.max(np.abs(traj.k - np.exp(0.5 * grid.forward_times())))
        assert err < 2e-5

        model2, grid2 = make_ak(a=0.5, horizon=1.0, n_r=100)
        init2 = InitialTriple(1.0, np.zeros(101), np.zeros(101))
        traj2 = simulate(model2, grid2, init2, ControlGrid(np.zeros(grid2.n_t)))
        err2 = np.max(np.abs(traj2.k - np.exp(0.5 * grid2.forward_times())))
        assert err2 <= 0.55 * err

    def test_stationary_data(self):
        model, grid = make_ak()
        init = InitialTriple(2.0, np.full(21, 2.0), np.full(21, 0.7))
        traj = simulate(model, grid, init, ControlGrid(np.full(grid.n_t, 0.7)))
        assert np.max(np.abs(traj.k - 2.0)) < 1e-12
        assert np.max(np.abs(traj.kdot)) < 1e-12

    def test_spec_reference_point_is_stationary(self):
        # phi0 = 1, phi1 = 1, omega = 0.2, c = 0.2 cancels all delay terms
        model, grid = make_ak()
        init = InitialTriple(1.0, np.ones(21), np.full(21, 0.2))
        traj = simulate(model, grid, init, ControlGrid(np.full(40, 0.2)))
        assert abs(traj.k[-1] - 1.0) < 1e-12

    def test_nonstationary_against_independent_oracle(self):
        model, grid = make_ak()
        init = InitialTriple(1.0, np.ones(21), np.full(21, 0.2))
        traj = simulate(model, grid, init, ControlGrid(np.full(40, 0.4)))
        oracle = euler_oracle(
            0.3, 1.0, 2.0, 1.0, lambda t: 1.0, lambda t: 0.2, lambda s: 0.4, 2000
        )
        assert abs(traj.k[-1] - oracle[-1]) < 1e-2
        # frozen regression of the production scheme at delta = 0.05
        assert traj.k[-1] == pytest.approx(0.72861334318922144, abs=1e-12)

    def test_first_order_convergence_to_oracle(self):
        oracle = euler_oracle(
            0.3, 1.0, 2.0, 1.0, lambda t: 1.0, lambda t: 0.2, lambda s: 0.4, 4000
        )[-1]
        errs = []
        for n_r in (20, 40):
            model, grid = make_ak(n_r=n_r)
            init = InitialTriple(1.0, np.ones(n_r + 1), np.full(n_r + 1, 0.2))
            traj = simulate(model, grid, init, ControlGrid(np.full(2 * n_r, 0.4)))
            errs.append(abs(traj.k[-1] - oracle))
        assert errs[1] <= 0.6 * errs[0]

    def test_linearity_in_data(self):
        model, grid = make_ak()
        rng = np.random.default_rng(11)

        def random_data():
            return (
                rng.normal(),
                rng.normal(size=21),
                rng.normal(size=21),
                rng.normal(size=40),
            )

        for _ in range(5):
            p0a, p1a, oma, ca = random_data()
            p0b, p1b, omb, cb = random_data()
            al, be = rng.normal(), rng.normal()
            ka = simulate(model, grid, InitialTriple(p0a, p1a, oma), ControlGrid(ca)).k
            kb = simulate(model, grid, InitialTriple(p0b, p1b, omb), ControlGrid(cb)).k
            kc = simulate(
                model,
                grid,
                InitialTriple(al * p0a + be * p0b, al * p1a + be * p1b, al * oma + be * omb),
                ControlGrid(al * ca + be * cb),
            ).k
            assert np.max(np.abs(kc - (al * ka + be * kb))) < 1e-11

    def test_kdot_reconstructs_state(self):
        model, grid = make_ak()
        rng = np.random.default_rng(3)
        init = InitialTriple(1.0, rng.uniform(0, 1, 21), rng.uniform(0, 1, 21))
        traj = simulate(model, grid, init, ControlGrid(rng.uniform(0, 1, 40)))
        recon = traj.k[0] + np.concatenate(
            [[0.0], np.cumsum(0.5 * grid.delta * (traj.kdot[1:] + traj.kdot[:-1]))]
        )
        assert np.max(np.abs(recon - traj.k)) < 5.0 * grid.delta

    def test_output_accounting(self):
        model, grid = make_ak()
        init = InitialTriple(1.0, np.ones(21), np.zeros(21))
        traj = simulate(model, grid, init, ControlGrid(np.zeros(40)))
        assert np.allclose(traj.output, model.a * traj.k)

    def test_advertising_nonneg_validation(self):
        n_r = 10
        model = ModelSpec(
            kind="Advertising", R=1.0, rho=0.0, a0=-0.1, b0=0.5,
            b1_density=np.full(n_r + 1, 0.2),
        )
        grid = Grid.for_model(model, 0.0, 1.0, n_r)
        bad = InitialTriple(1.0, np.full(n_r + 1, -1.0), np.zeros(n_r + 1))
        with pytest.raises(ValueError, match="nonnegative"):
            simulate(model, grid, bad, ControlGrid(np.zeros(grid.n_t)))
        mismatched = InitialTriple(2.0, np.ones(n_r + 1), np.zeros(n_r + 1))
        with pytest.raises(ValueError, match="phi1"):
            simulate(model, grid, mismatched, ControlGrid(np.zeros(grid.n_t)))

    def test_shape_errors(self):
        model, grid = make_ak()
        short = InitialTriple(1.0, np.zeros(5), np.zeros(21))
        with pytest.raises(ValueError, match="expected 21 samples"):
            simulate(model, grid, short, ControlGrid(np.zeros(40)))
        init = InitialTriple(1.0, np.zeros(21), np.zeros(21))
        with pytest.raises(ValueError, match="expected 40 step values"):
            simulate(model, grid, init, ControlGrid(np.zeros(3)))
        with pytest.raises(ValueError, match="finite"):
            InitialTriple(np.nan, np.zeros(21), np.zeros(21))
        with pytest.raises(ValueError, match="does not divide"):
            Grid.for_model(model, 0.0, 2.03, 20)


class TestHistoryFunctional:
    def test_difference_annihilates_constants(self):
        L = HistoryFunctional(c0=1.0, cR=-1.0)
        assert apply_history_functional(L, np.full(11, 5.0), 0.1) == 0.0

    def test_difference_on_identity(self):
        L = HistoryFunctional(c0=1.0, cR=-1.0)
        theta = np.linspace(-1.0, 0.0, 11)
        assert apply_history_functional(L, theta, 0.1) == pytest.approx(1.0)

    def test_point_plus_density(self):
        n_r = 10
        f = HistoryFunctional(c0=-0.1, cR=0.0, density=np.full(n_r + 1, 0.2))
        val = apply_history_functional(f, np.ones(n_r + 1), 1.0 / n_r)
        assert val == pytest.approx(-0.1 + 0.2)

    def test_length_mismatch(self):
        f = HistoryFunctional(c0=0.0, cR=0.0, density=np.ones(5))
        with pytest.raises(ValueError, match="density"):
            apply_history_functional(f, np.ones(7), 0.1)


class TestPathOps:
    def test_segment_at_start(self):
        model, grid = make_ak(n_r=4, horizon=2.0)
        hist = np.arange(5.0)
        path = np.concatenate([hist, np.zeros(grid.n_t)])
        assert np.array_equal(segment_extract(path, grid, 0.0), hist)

    def test_segment_straddle(self):
        # history zero, forward one: the window at t + R keeps a single
        # zero at its oldest node
        model, grid = make_ak(n_r=4, horizon=2.0)
        path = np.concatenate([np.zeros(5), np.ones(grid.n_t)])
        seg = segment_extract(path, grid, 1.0)
        assert np.array_equal(seg, np.array([0.0, 1, 1, 1, 1]))

    def test_segment_random_window(self):
        model, grid = make_ak(n_r=7, horizon=3.0)
        rng = np.random.default_rng(9)
        path = rng.normal(size=grid.n_r + grid.n_t + 1)
        for j in (0, 3, grid.n_t):
            seg = segment_extract(path, grid, j * grid.delta)
            assert np.array_equal(seg, path[j : j + 8])
        with pytest.raises(ValueError, match="off-grid"):
            segment_extract(path, grid, 0.51 * grid.delta)

    def test_extend_zero_padding(self):
        model, grid = make_ak(n_r=4, horizon=1.0)
        fwd = np.arange(1.0, grid.n_t + 2)
        plus = extend_plus(fwd, grid)
        assert np.array_equal(plus[:4], np.zeros(4))
        assert np.array_equal(plus[4:], fwd)
        assert np.all(extend_plus(np.zeros(grid.n_t + 1), grid) == 0.0)
        hist = np.arange(-4.0, 1.0)
        minus = extend_minus(hist, grid)
        assert np.array_equal(minus[:4], hist[:4])
        assert np.all(minus[4:] == 0.0)

    def test_split_then_sum_identity(self):
        model, grid = make_ak(n_r=6, horizon=1.5)
        rng = np.random.default_rng(4)
        path = rng.normal(size=grid.n_r + grid.n_t + 1)
        fwd = path[grid.n_r :]
        hist = path[: grid.n_r + 1]
        recon = extend_plus(fwd, grid) + extend_minus(hist, grid)
        assert np.array_equal(recon, path)

    def test_extend_minus_interior_value(self):
        model, grid = make_ak(n_r=4, horizon=1.0)
        hist = np.arange(5.0)
        minus = extend_minus(hist, grid)
        # value at t - R/2 is the history sample at -R/2
        assert minus[2] == hist[2]


class TestEstimate:
    def test_zero_data(self):
        model, grid = make_ak()
        rep = estimate_check(
            model, grid, InitialTriple(0.0, np.zeros(21), np.zeros(21)),
            ControlGrid(np.zeros(40)),
        )
        assert rep.sup_norm_k == 0.0
        assert rep.data_norm == 0.0
        assert rep.ratio == 0.0

    def test_scaling_invariance(self):
        model, grid = make_ak()
        rng = np.random.default_rng(8)
        init = InitialTriple(rng.normal(), rng.normal(size=21), rng.normal(size=21))
        ctrl = ControlGrid(rng.normal(size=40))
        r1 = estimate_check(model, grid, init, ctrl)
        lam = 3.0
        init2 = InitialTriple(lam * init.phi0, lam * init.phi1, lam * init.omega)
        r2 = estimate_check(model, grid, init2, ControlGrid(lam * ctrl.values))
        assert r2.ratio == pytest.approx(r1.ratio, rel=1e-12)

    def test_random_suite_bounded_and_grid_stable(self):
        # bound frozen from the generating run; refinement must not blow it
        model, _ = make_ak()
        for n_r, bound in ((20, 0.55), (40, 0.55)):
            grid = Grid.for_model(model, 0.0, 2.0, n_r)
            rng = np.random.default_rng(2024)
            worst = 0.0
            for _ in range(20):
                init = InitialTriple(
                    rng.uniform(-2, 2),
                    rng.uniform(-2, 2, n_r + 1),
                    rng.uniform(-2, 2, n_r + 1),
                )
                ctrl = ControlGrid(rng.uniform(-2, 2, grid.n_t))
                worst = max(worst, estimate_check(model, grid, init, ctrl).ratio)
            assert worst < bound
