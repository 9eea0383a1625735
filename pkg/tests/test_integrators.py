import math

import numpy as np
import pytest

from stochch.dynamics import DiffusionSpec, GalerkinOperators, Potential
from stochch.errors import BlowUpError, ConfigurationError
from stochch.integrators import (
    BLOCK_SIZE,
    SchemeConfig,
    SolverState,
    integrate_block,
    map_path_blocks,
    simulate,
    step_exp_euler,
    step_semi_implicit,
    step_split_yz,
)
from stochch.noise import NoisePlan, WienerIncrements
from stochch.spectral import SpectralField, build_space

DW = Potential.double_well()
ZERO = DiffusionSpec.zero()


def e(space, j=1, amp=1.0):
    c = np.zeros(space.N)
    c[j - 1] = amp
    return SpectralField(space, c)


def ou_variance(lam, sigma, t):
    return sigma ** 2 * -np.expm1(-2 * lam ** 2 * t) / (2 * lam ** 2)


def test_scheme_config():
    cfg = SchemeConfig(dt=0.3, T=1.0, K=4)
    assert cfg.steps == 3 and cfg.dt == pytest.approx(1 / 3)
    assert cfg.record_steps()[0] == 0 and cfg.record_steps()[-1] == 3
    cfg = SchemeConfig(dt=1e-3, T=1.0, K=4, record_every=300)
    assert list(cfg.record_steps()) == [0, 300, 600, 900, 1000]
    assert len(SchemeConfig(dt=1e-4, T=1.0, K=4).record_steps()) >= 65
    for bad in (dict(dt=0.0, T=1.0, K=1), dict(dt=0.1, T=-1.0, K=1), dict(dt=0.1, T=1.0, K=0),
                dict(dt=0.1, T=1.0, K=1, scheme="rk4"), dict(dt=0.1, T=1.0, K=1, tamed=True)):
        with pytest.raises(ConfigurationError):
            SchemeConfig(**bad)


@pytest.mark.parametrize("stepper", [step_exp_euler, step_semi_implicit])
def test_zero_is_a_fixed_point(stepper):
    s = build_space(np.pi, 5)
    dW = WienerIncrements(20, 0.01, np.ones(20))
    out = stepper(SolverState(0.0, SpectralField(s, np.zeros(5))), 0.01, dW, DW, ZERO)
    assert not np.any(out.x.coeffs) and out.t == 0.01


def test_linear_steps():
    s = build_space(np.pi, 3)
    dt = 0.01
    dW = WienerIncrements(3, dt, np.zeros(3))
    x = SolverState(0.0, e(s))
    assert step_exp_euler(x, dt, dW, None, ZERO).x.coeffs[0] == pytest.approx(math.exp(-dt), rel=1e-15)
    assert step_semi_implicit(x, dt, dW, None, ZERO).x.coeffs[0] == pytest.approx(1 / (1 + dt), rel=1e-15)


def test_dt_mismatch():
    s = build_space(np.pi, 3)
    with pytest.raises(ConfigurationError):
        step_exp_euler(SolverState(0.0, e(s)), 0.01, WienerIncrements(3, 0.02, np.zeros(3)), None, ZERO)
    with pytest.raises(ConfigurationError):
        step_split_yz(SolverState(0.0, e(s)), 0.01, WienerIncrements(3, 0.01, np.zeros(3)), None, ZERO)


def test_one_step_noise_is_exact_ou_kick():
    # from x = 0 each mode receives sigma * sqrt((1 - e^{-2a}) / (2a)) * dbeta_j, a = lambda^2 dt
    s = build_space(np.pi, 6)
    dt, sigma = 0.05, 1.7
    inc = np.linspace(-1, 1, 24)
    out = step_exp_euler(SolverState(0.0, SpectralField(s, np.zeros(6))), dt,
                         WienerIncrements(24, dt, inc), None, DiffusionSpec.constant(sigma))
    a = s.lambdas ** 2 * dt
    np.testing.assert_allclose(out.x.coeffs, sigma * np.sqrt(-np.expm1(-2 * a) / (2 * a)) * inc[:6], rtol=1e-14)
    # so the one-step variance sigma^2 * that^2 * dt is the exact OU variance
    np.testing.assert_allclose(sigma ** 2 * -np.expm1(-2 * a) / (2 * a) * dt, ou_variance(s.lambdas, sigma, dt))


def test_semi_implicit_gap_is_second_order():
    s = build_space(np.pi, 6)
    x = SolverState(0.0, SpectralField(s, np.array([0.9, -0.4, 0.2, 0.1, 0.0, -0.05])))
    gaps = []
    for dt in (1e-5, 5e-6, 2.5e-6):   # lambda_6^2 dt << 1
        dW = WienerIncrements(6, dt, np.zeros(6))
        gaps.append(np.linalg.norm(step_exp_euler(x, dt, dW, DW, ZERO).x.coeffs
                                   - step_semi_implicit(x, dt, dW, DW, ZERO).x.coeffs))
    for big, small in zip(gaps, gaps[1:]):
        assert big / small == pytest.approx(4.0, rel=0.05)


def test_split_state_and_zero_noise_degenerates():
    s = build_space(np.pi, 5)
    dt = 1e-3
    x0 = SpectralField(s, np.array([1.0, 0.5, 0, 0, 0]))
    state = SolverState.split(0.0, x0, SpectralField(s, np.zeros(5)))
    direct = SolverState(0.0, x0)
    dW = WienerIncrements(20, dt, np.zeros(20))
    for _ in range(20):
        state = step_split_yz(state, dt, dW, DW, ZERO)
        direct = step_exp_euler(direct, dt, dW, DW, ZERO)
    assert not np.any(state.z.coeffs)
    np.testing.assert_allclose(state.x.coeffs, state.y.coeffs + state.z.coeffs, rtol=0, atol=0)
    np.testing.assert_allclose(state.x.coeffs, direct.x.coeffs, rtol=1e-14, atol=1e-16)


def test_split_matches_direct_with_noise(rng):
    s = build_space(np.pi, 8)
    dt = 1e-4
    spec = DiffusionSpec.sublinear(0.5, 0.5)
    x0 = SpectralField(s, np.eye(8)[0])
    state, direct = SolverState.split(0.0, x0, SpectralField(s, np.zeros(8))), SolverState(0.0, x0)
    for _ in range(200):
        dW = WienerIncrements(32, dt, rng.normal(scale=math.sqrt(dt), size=32))
        state = step_split_yz(state, dt, dW, DW, spec)
        direct = step_exp_euler(direct, dt, dW, DW, spec)
    # y + z and x obey the same recursion; only rounding separates them
    np.testing.assert_allclose(state.x.coeffs, direct.x.coeffs, rtol=1e-11, atol=1e-13)


def test_split_z_is_weighted_noise_sum():
    s = build_space(np.pi, 4)
    dt, sigma, n = 1e-2, 0.8, 30
    plan = NoisePlan(4, 4, dt, n, 1)
    state = SolverState.split(0.0, SpectralField(s, np.zeros(4)), SpectralField(s, np.zeros(4)))
    expected = np.zeros(4)
    a = s.lambdas ** 2 * dt
    psi = np.sqrt(-np.expm1(-2 * a) / (2 * a))
    for k in range(n):
        inc = plan.block([0], k)[0]
        state = step_split_yz(state, dt, WienerIncrements(4, dt, inc), None, DiffusionSpec.constant(sigma))
        expected = np.exp(-a) * expected + sigma * psi * inc
    np.testing.assert_allclose(state.z.coeffs, expected, rtol=1e-12)
    assert not np.any(state.y.coeffs)


def test_split_z_variance_after_n_steps():
    s = build_space(np.pi, 3)
    dt, n, sigma, paths = 0.01, 20, 1.0, 20_000
    cfg = SchemeConfig(dt, n * dt, 3, scheme="split_yz")
    plan = NoisePlan(9, 3, cfg.dt, cfg.steps, paths)
    ops = GalerkinOperators(s, None, DiffusionSpec.constant(sigma), 3)
    res = integrate_block([ops], [np.zeros(3)], cfg, plan, np.arange(paths))
    var = res.finals[0].var(axis=0)
    expected = ou_variance(s.lambdas, sigma, n * dt)
    np.testing.assert_allclose(var, expected, rtol=4 * math.sqrt(2 / paths))


@pytest.mark.parametrize("dt", [1e-1, 3e-2, 1e-3, 3e-4])
def test_linear_exactness_any_dt(dt):
    s = build_space(np.pi, 4)
    cfg = SchemeConfig(dt, 1.0, 4)
    traj = simulate(SpectralField(s, np.array([1.0, 0, 0.3, 0])), cfg, None, ZERO,
                    NoisePlan(0, 4, cfg.dt, cfg.steps, 1), 0)
    assert traj.states[-1][0] == pytest.approx(math.exp(-1), rel=1e-13)
    assert traj.states[-1][2] == pytest.approx(0.3 * math.exp(-81), rel=1e-12)


def test_semi_implicit_scalar_recursion():
    s = build_space(np.pi, 2)
    cfg = SchemeConfig(1e-2, 1.0, 2, scheme="semi_implicit")
    traj = simulate(e(s), cfg, None, ZERO, NoisePlan(0, 2, cfg.dt, cfg.steps, 1), 0)
    assert traj.states[-1][0] == pytest.approx((1 + 1e-2) ** -100, rel=1e-12)


def test_trajectory_layout():
    s = build_space(np.pi, 4)
    cfg = SchemeConfig(1e-3, 0.1, 16, record_every=7)
    traj = simulate(e(s), cfg, DW, DiffusionSpec.sublinear(0.5, 0.5), NoisePlan(1, 16, cfg.dt, cfg.steps, 2), 1)
    assert traj.times[0] == 0.0 and traj.times[-1] == 0.1
    assert np.all(np.diff(traj.times) > 0)
    assert traj.states.shape == (len(traj.times), 4)
    assert traj.seed == 1 and traj.path == 1
    np.testing.assert_array_equal(traj.field(0).coeffs, e(s).coeffs)


def test_double_well_run_completes():
    s = build_space(np.pi, 32)
    cfg = SchemeConfig(1e-4, 0.5, 128)
    traj = simulate(e(s), cfg, DW, DiffusionSpec.sublinear(0.5, 0.5), NoisePlan(2, 128, cfg.dt, cfg.steps, 1), 0)
    assert np.all(np.isfinite(traj.states))
    assert np.max(np.linalg.norm(traj.states, axis=1)) < 10


def test_blow_up_names_step_and_mode():
    s = build_space(np.pi, 4)
    cfg = SchemeConfig(0.1, 1.0, 4)
    with pytest.raises(BlowUpError) as info:
        simulate(e(s, 1, 1e3), cfg, DW, ZERO, NoisePlan(0, 4, cfg.dt, cfg.steps, 1), 0)
    assert info.value.step >= 1 and 1 <= info.value.mode <= 4
    assert f"step {info.value.step}" in str(info.value)


def test_integrate_block_excludes_bad_paths():
    s = build_space(np.pi, 4)
    cfg = SchemeConfig(0.1, 1.0, 4)
    ops = GalerkinOperators(s, DW, ZERO, 4)
    res = integrate_block([ops], [np.array([1e3, 0, 0, 0])], cfg, NoisePlan(0, 4, cfg.dt, cfg.steps, 2), [0, 1])
    assert not res.alive.any()
    assert set(res.failures) == {0, 1}
    assert np.all(res.finals[0] == 0)


def test_plan_mismatch_rejected():
    s = build_space(np.pi, 4)
    cfg = SchemeConfig(0.1, 1.0, 16)
    ops = GalerkinOperators(s, DW, ZERO, 16)
    with pytest.raises(ConfigurationError):
        integrate_block([ops], [np.zeros(4)], cfg, NoisePlan(0, 16, 0.05, 20, 1), [0])
    with pytest.raises(ConfigurationError):
        integrate_block([ops], [np.zeros(4)], cfg, NoisePlan(0, 8, 0.1, 10, 1), [0])


def test_lockstep_matches_separate_runs():
    spec = DiffusionSpec.sublinear(0.5, 0.5)
    cfg = SchemeConfig(1e-3, 0.05, 64)
    plan = NoisePlan(5, 64, cfg.dt, cfg.steps, 3)
    spaces = [build_space(np.pi, n) for n in (4, 16)]
    models = [GalerkinOperators(sp, DW, spec, 64) for sp in spaces]
    x0s = [np.eye(sp.N)[0] for sp in spaces]
    both = integrate_block(models, x0s, cfg, plan, [0, 1, 2])
    for i in range(2):
        alone = integrate_block([models[i]], [x0s[i]], cfg, plan, [0, 1, 2])
        assert np.array_equal(both.finals[i], alone.finals[0])


def test_self_convergence_order(rng):
    # coarse increments are sums of fine ones, so every run sees the same Brownian path
    N, K, T = 4, 16, 0.05
    s = build_space(np.pi, N)
    spec = DiffusionSpec.sublinear(0.5, 0.5)
    fine_steps = 512
    dt_f = T / fine_steps
    x0 = SpectralField(s, np.array([1.0, 0.3, 0, 0]))
    factors = [1, 4, 8, 16, 32]
    errs = np.zeros(len(factors) - 1)
    for _ in range(16):
        fine_inc = rng.normal(scale=math.sqrt(dt_f), size=(fine_steps, K))
        finals = []
        for f in factors:
            inc = fine_inc.reshape(fine_steps // f, f, K).sum(axis=1)
            st = SolverState(0.0, x0)
            for row in inc:
                st = step_exp_euler(st, dt_f * f, WienerIncrements(K, dt_f * f, row), DW, spec)
            finals.append(st.x.coeffs)
        errs += [np.sum((x - finals[0]) ** 2) for x in finals[1:]]
    rms = np.sqrt(errs / 16)
    slope = np.polyfit(np.log(np.array(factors[1:]) * dt_f), np.log(rms), 1)[0]
    assert slope >= 0.5


def test_map_path_blocks_order_and_threads():
    out1 = map_path_blocks(lambda b: b.copy(), 50, threads=1)
    out3 = map_path_blocks(lambda b: b.copy(), 50, threads=3)
    assert [len(b) for b in out1] == [BLOCK_SIZE] * 3 + [50 - 3 * BLOCK_SIZE]
    assert all(np.array_equal(a, b) for a, b in zip(out1, out3))
