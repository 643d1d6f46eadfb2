"""Acceptance suite: one test per criterion, each printing a pass/fail
line with the measured quantity at its pinned tolerance."""

import time

import numpy as np

from delayoc import (
    ControlGrid,
    Crra,
    Grid,
    InitialTriple,
    M2Point,
    ModelSpec,
    ObjectiveSpec,
    PenalizedSolver,
    Quadratic,
    absolute_value,
    build_x1,
    closed_loop_rollout,
    convexity_check,
    dp_oracle,
    dpp_check,
    evolve_abstract,
    gradient_fd,
    hjb_residual,
    semigroup_apply,
    simulate,
    solve_penalized,
    value_W,
    yosida_conjugate_check,
)
from delayoc.dde import trapezoid_norm, trapezoid_weights
from delayoc.value import _running_weights


def report(name: str, ok: bool, detail: str):
    print(f"{name}: {'PASS' if ok else 'FAIL'}  ({detail})")
    assert ok, f"{name} failed: {detail}"


def lift(nodes: np.ndarray, factor: int) -> np.ndarray:
    n = nodes.size - 1
    fine = np.linspace(0.0, n, factor * n + 1)
    return np.interp(fine, np.arange(n + 1), nodes)


def test_ac1_reformulation_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(1001)
    worst_gap = 0.0
    worst_order = np.inf
    for _ in range(20):
        model = ModelSpec(kind="AK", a=float(rng.uniform(0.1, 1.0)), R=1.0, rho=0.0)
        grid = Grid.for_model(model, 0.0, 2.0, 20)
        init = InitialTriple(
            float(rng.uniform(0.5, 1.5)),
            rng.uniform(-1.0, 1.0, 21),
            rng.uniform(0.0, 1.0, 21),
        )
        ctrl = ControlGrid(rng.uniform(0.0, 1.0, grid.n_t))
        k_sim = simulate(model, grid, init, ctrl).k
        x = build_x1(model, grid, init)
        k_abs = evolve_abstract(model, grid, x, ctrl).y0
        worst_gap = max(worst_gap, float(np.max(np.abs(k_sim - k_abs))))

        fine_grid = Grid.for_model(model, 0.0, 2.0, 200)
        fine_init = InitialTriple(init.phi0, lift(init.phi1, 10), lift(init.omega, 10))
        fine_ctrl = ControlGrid(np.repeat(ctrl.values, 10))
        ref = simulate(model, fine_grid, fine_init, fine_ctrl).k[::10]
        mid_grid = Grid.for_model(model, 0.0, 2.0, 40)
        mid_init = InitialTriple(init.phi0, lift(init.phi1, 2), lift(init.omega, 2))
        mid_ctrl = ControlGrid(np.repeat(ctrl.values, 2))
        for path_c, path_m in (
            (k_sim, simulate(model, mid_grid, mid_init, mid_ctrl).k),
            (k_abs, evolve_abstract(model, mid_grid, build_x1(model, mid_grid, mid_init), mid_ctrl).y0),
        ):
            e1 = float(np.max(np.abs(path_c - ref)))
            e2 = float(np.max(np.abs(path_m[::2] - ref)))
            if e2 > 0:
                worst_order = min(worst_order, float(np.log2(e1 / e2)))
    elapsed = time.time() - t0
    ok = worst_gap <= 1e-10 and worst_order >= 0.9 and elapsed < 30.0
    report(
        "AC-1 reformulation equivalence",
        ok,
        f"max gap {worst_gap:.2e} <= 1e-10, min order {worst_order:.2f} >= 0.9, {elapsed:.1f}s",
    )


def test_ac2_structural_state_sufficiency():
    t0 = time.time()
    rng = np.random.default_rng(1002)
    model = ModelSpec(kind="AK", a=0.4, R=1.0, rho=0.0)
    grid = Grid.for_model(model, 0.0, 2.0, 20)
    worst = 0.0
    for _ in range(10):
        phi1 = rng.uniform(-1.0, 1.0, 21)
        omega = rng.uniform(0.0, 1.0, 21)
        pert = rng.uniform(-0.5, 0.5, 21)
        pert[-1] = 0.0
        a_init = InitialTriple(1.0, phi1, omega)
        b_init = InitialTriple(1.0, phi1 + pert / model.a, omega + pert)
        xa, xb = build_x1(model, grid, a_init), build_x1(model, grid, b_init)
        assert np.max(np.abs(xa.x1 - xb.x1)) < 1e-12
        for _ in range(5):
            ctrl = ControlGrid(rng.uniform(0.0, 1.0, grid.n_t))
            ka = simulate(model, grid, a_init, ctrl).k
            kb = simulate(model, grid, b_init, ctrl).k
            worst = max(worst, float(np.max(np.abs(ka - kb))))
    elapsed = time.time() - t0
    bound = 10.0 * grid.delta
    ok = worst <= bound and elapsed < 30.0
    report(
        "AC-2 structural-state sufficiency",
        ok,
        f"max trajectory gap {worst:.2e} <= {bound:.2e}, {elapsed:.1f}s",
    )


def test_ac3_yosida_conjugation_identity():
    t0 = time.time()
    cases = [
        ("quadratic", Quadratic(1.0), np.linspace(-5.0, 5.0, 21)),
        ("absolute value", absolute_value(), np.linspace(-0.9, 0.9, 19)),
        ("power sigma=2", Crra(2.0), np.linspace(-3.0, -0.1, 15)),
    ]
    worst = 0.0
    for _, f, grid in cases:
        for n in (1.0, 2.0, 8.0):
            worst = max(worst, yosida_conjugate_check(f, n, grid))
    elapsed = time.time() - t0
    ok = worst <= 1e-5 and elapsed < 10.0
    report("AC-3 quadratic-smoothing conjugation identity", ok,
           f"max error {worst:.2e} <= 1e-5, {elapsed:.1f}s")


def test_ac4_monotone_chain(crra_spec, crra_x, adv_spec, adv_x, lq_spec, lq_x):
    t0 = time.time()
    n_list = [1, 2, 4, 8, 16, 32]
    ok = True
    details = []
    for label, spec, x in (
        ("AK", crra_spec, crra_x),
        ("Advertising", adv_spec, adv_x),
    ):
        sweep = value_W(spec, x, n_list)
        viol = float(np.min(sweep["diffs"]))
        ok = ok and sweep["monotone_ok"] and viol >= -10.0 * spec.tol
        details.append(f"{label} min diff {viol:.2e}")
    sweep = value_W(lq_spec, lq_x, n_list)
    ratios = sweep["diffs"][:-1] / sweep["diffs"][1:]
    ok = ok and bool(np.all(ratios >= 1.5))
    details.append(f"quadratic gap ratios min {float(np.min(ratios)):.2f} >= 1.5")
    elapsed = time.time() - t0
    ok = ok and elapsed < 180.0
    report("AC-4 monotone value chain", ok, "; ".join(details) + f", {elapsed:.1f}s")


def test_ac5_value_convexity(crra_spec, crra_x):
    t0 = time.time()
    rng = np.random.default_rng(1005)
    worst = convexity_check(crra_spec, crra_x, 50, rng, x0_spread=0.3, x1_spread=0.1)
    elapsed = time.time() - t0
    ok = worst <= 1e-5 and elapsed < 120.0
    report("AC-5 value convexity", ok,
           f"max midpoint violation {worst:.2e} <= 1e-5, {elapsed:.1f}s")


def test_ac6_oracle_agreement():
    t0 = time.time()
    rng = np.random.default_rng(1006)
    ok = True
    details = []
    for i in range(5):
        a = float(rng.uniform(0.2, 0.5))
        model = ModelSpec(kind="AK", a=a, R=1.0, rho=0.0)
        grid = Grid.for_model(model, 0.0, 2.0, 2)  # four steps
        spec = ObjectiveSpec(
            model=model, grid=grid, running=Quadratic(1.0),
            terminal=Quadratic(4.0, float(rng.uniform(0.4, 0.7))), n=4.0, tol=1e-11,
        )
        x = M2Point(float(rng.uniform(0.8, 1.2)), np.zeros(3))
        res = solve_penalized(spec, x)
        levels = np.linspace(0.0, 1.2, 9)
        spacing = levels[1] - levels[0]
        coarse = dp_oracle(spec, x, levels)
        fine = dp_oracle(spec, x, np.linspace(0.0, 1.2, 17))
        bound = 2.0 * spacing**2 + 10.0 * spec.tol
        gap_c = coarse - res.value
        gap_f = fine - res.value
        inst_ok = (
            -10.0 * spec.tol <= gap_c <= bound
            and gap_f <= 0.5 * gap_c + 10.0 * spec.tol
        )
        ok = ok and inst_ok
        if i == 0:
            details.append(f"gap {gap_c:.2e} <= {bound:.2e}, refined {gap_f:.2e}")
    elapsed = time.time() - t0
    ok = ok and elapsed < 60.0
    report("AC-6 enumeration oracle agreement", ok, "; ".join(details) + f", {elapsed:.1f}s")


def test_ac7_gradient_correctness(crra_spec, crra_x, lq_spec, lq_x):
    t0 = time.time()
    rng = np.random.default_rng(1007)
    worst = 0.0
    for spec, x in ((crra_spec, crra_x), (lq_spec, lq_x)):
        solver = PenalizedSolver(spec)
        khom = solver.dyn.k_base(x)
        for _ in range(10):
            c = rng.uniform(0.2, 1.5, spec.grid.n_t)
            g = solver.smooth_gradient(khom, c, 10.0)
            v = rng.standard_normal(c.size)
            v /= np.linalg.norm(v)
            eps = 1e-6
            fd = (
                solver.smooth_value(khom, c + eps * v, 10.0)
                - solver.smooth_value(khom, c - eps * v, 10.0)
            ) / (2.0 * eps)
            worst = max(worst, abs(float(g @ v) - fd) / max(1.0, abs(fd)))
    elapsed = time.time() - t0
    ok = worst <= 1e-5 and elapsed < 20.0
    report("AC-7 adjoint gradient correctness", ok,
           f"max relative error {worst:.2e} <= 1e-5, {elapsed:.1f}s")


def test_ac8_dpp_residual(crra_spec, crra_x):
    t0 = time.time()
    worst = max(dpp_check(crra_spec, crra_x, split) for split in (10, 20, 30))
    elapsed = time.time() - t0
    bound = 5.0 * crra_spec.tol
    ok = worst <= bound and elapsed < 60.0
    report("AC-8 split-horizon residual", ok,
           f"max residual {worst:.2e} <= {bound:.2e}, {elapsed:.1f}s")


def test_ac9_lq_cross_check(lq_short_spec, lq_x):
    t0 = time.time()
    spec, x = lq_short_spec, lq_x
    grid = spec.grid
    # normal equations through the public evolution maps
    tau = _running_weights(spec)
    zero = ControlGrid(np.zeros(grid.n_t))
    base = evolve_abstract(spec.model, grid, x, zero).y0
    cols = []
    for j in range(grid.n_t):
        e = np.zeros(grid.n_t)
        e[j] = 1.0
        cols.append(
            evolve_abstract(spec.model, grid, M2Point(0.0, np.zeros(21)), ControlGrid(e)).y0
        )
    M = np.stack(cols, axis=1)
    m_T = M[-1]
    q, rbar = spec.terminal.coeff, spec.terminal.center
    alpha = spec.running.coeff + 1.0 / spec.n
    c_star = np.linalg.solve(
        np.diag(tau * alpha) + q * np.outer(m_T, m_T), -q * (base[-1] - rbar) * m_T
    )
    k_T = base[-1] + m_T @ c_star
    w_ref = (
        0.5 * float(np.dot(tau, c_star**2)) * spec.running.coeff
        + float(np.dot(tau, c_star**2)) / (2.0 * spec.n)
        + 0.5 * q * (k_T - rbar) ** 2
    )
    res = solve_penalized(spec, x)
    value_err = abs(res.value - w_ref)

    lam = q * (k_T - rbar)
    d0 = evolve_abstract(spec.model, grid, M2Point(1.0, np.zeros(21)), zero).y0[-1]
    w = trapezoid_weights(21, grid.delta)
    p1_ref = np.empty(21)
    for i in range(21):
        e = np.zeros(21)
        e[i] = 1.0
        di = evolve_abstract(spec.model, grid, M2Point(0.0, e), zero).y0[-1]
        p1_ref[i] = lam * di / w[i]
    grad = gradient_fd(spec, spec.n, grid.t, x, bump=1e-4)
    grad_err = max(abs(grad.p0 - lam * d0), float(np.max(np.abs(grad.p1 - p1_ref))))

    roll = closed_loop_rollout(spec, spec.n, grid.t, x)
    ctrl_err = float(np.max(np.abs(roll.controls - c_star)))

    resids = []
    for n_r, bump in ((20, 2e-4), (40, 1e-4), (80, 5e-5)):
        g2 = Grid.for_model(spec.model, 0.0, grid.horizon, n_r)
        spec2 = ObjectiveSpec(
            model=spec.model, grid=g2, running=spec.running,
            terminal=spec.terminal, n=spec.n, tol=1e-11,
        )
        theta = np.linspace(-1.0, 0.0, n_r + 1)
        x2 = M2Point(1.0, 0.1 * np.sin(3.0 * (theta + 1.0)))
        resids.append(hjb_residual(spec2, spec.n, 0.2, x2, bump=bump).residual)
    resid_ok = resids[1] <= 1.2 * resids[0] and resids[2] <= 1.2 * resids[1] and resids[2] < resids[0]

    elapsed = time.time() - t0
    ok = value_err <= 1e-4 and grad_err <= 1e-4 and ctrl_err <= 1e-2 and resid_ok and elapsed < 60.0
    report(
        "AC-9 quadratic cross-check",
        ok,
        f"value {value_err:.2e} <= 1e-4, gradient {grad_err:.2e} <= 1e-4, "
        f"control {ctrl_err:.2e} <= 1e-2, residuals {resids[0]:.1e}>{resids[1]:.1e}>{resids[2]:.1e}, {elapsed:.1f}s",
    )


def test_ac10_closed_loop_rollout(lq_short_spec, lq_x, crra_spec, crra_x):
    t0 = time.time()
    lq_rep = closed_loop_rollout(lq_short_spec, 8.0, lq_short_spec.grid.t, lq_x)
    crra_rep = closed_loop_rollout(crra_spec, 8.0, crra_spec.grid.t, crra_x)
    elapsed = time.time() - t0
    ok = (
        not lq_rep.aborted
        and not crra_rep.aborted
        and -lq_short_spec.tol <= lq_rep.gap <= 1e-2
        and -crra_spec.tol <= crra_rep.gap <= 5e-2
        and elapsed < 60.0
    )
    report(
        "AC-10 feedback rollout",
        ok,
        f"quadratic gap {lq_rep.gap:.2e} in [-tol, 1e-2], "
        f"power gap {crra_rep.gap:.2e} in [-tol, 5e-2], {elapsed:.1f}s",
    )


def test_ac11_semigroup_law():
    t0 = time.time()
    model = ModelSpec(kind="AK", a=0.5, R=1.0, rho=0.0)
    n_r = 20
    delta = model.R / n_r
    rng = np.random.default_rng(1011)
    worst = 0.0
    for _ in range(10):
        phi = M2Point(float(rng.normal()), rng.normal(size=n_r + 1))
        for s1, s2 in ((0.25, 0.5), (0.5, 1.0), (1.0, 0.75)):
            direct = semigroup_apply(model, s1 + s2, phi)
            comp = semigroup_apply(model, s2, semigroup_apply(model, s1, phi))
            gap = abs(direct.x0 - comp.x0) + trapezoid_norm(direct.x1 - comp.x1, delta)
            worst = max(worst, gap)
    ident = semigroup_apply(model, 0.0, M2Point(1.5, rng.normal(size=n_r + 1)))
    const = semigroup_apply(model, 1.25, M2Point(2.0, np.full(n_r + 1, 2.0)))
    id_ok = ident.x0 == 1.5
    const_ok = abs(const.x0 - 2.0) < 1e-12 and float(np.max(np.abs(const.x1 - 2.0))) < 1e-12
    elapsed = time.time() - t0
    ok = worst <= 10.0 * delta and id_ok and const_ok and elapsed < 10.0
    report(
        "AC-11 semigroup composition law",
        ok,
        f"max composition gap {worst:.2e} <= {10.0 * delta:.2e}, identity exact, "
        f"constants fixed, {elapsed:.1f}s",
    )
