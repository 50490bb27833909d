import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_run, central_diff, relative_error, small_config, \
    small_hp
from rislab.explorer import (BetaExplorer, LambdaSchedule, assemble_scaling,
                             perturb)
from rislab.numerics import make_rng, spawn_rngs
from rislab.sac import Batch, SacAgent
from test_sac import QuadraticCritic, random_batch


def make_explorer(seed=0, state_dim=6, n_prefix=4, n_elements=3,
                  beta_lo=0.3, mode="blended", zero_net=False):
    rng = None if zero_net else make_rng(seed)
    explorer = BetaExplorer(state_dim, n_prefix, n_elements, 16,
                            make_rng(seed), beta_lo, mode)
    if zero_net:
        explorer.net.params[...] = 0.0
        explorer.target_net.params[...] = 0.0
    return explorer


class TestLambdaSchedule:
    def test_initial_value(self):
        assert LambdaSchedule(0.3, 20000).step() == pytest.approx(0.3)

    def test_endpoint_zero(self):
        sched = LambdaSchedule(0.3, 10)
        vals = [sched.step() for _ in range(11)]
        assert vals[10] == 0.0
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_halfway(self):
        sched = LambdaSchedule(0.3, 10)
        for _ in range(5):
            sched.step()
        assert sched.step() == pytest.approx(0.15)

    def test_stays_at_zero_beyond_horizon(self):
        sched = LambdaSchedule(0.5, 4)
        for _ in range(10):
            lam = sched.step()
        assert lam == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            LambdaSchedule(1.5, 10)
        with pytest.raises(ValueError):
            LambdaSchedule(0.3, 0)


class TestPredictBeta:
    def test_zero_net_midpoint(self):
        explorer = make_explorer(beta_lo=0.3, zero_net=True)
        beta = explorer.predict_beta(np.zeros(6))
        assert np.allclose(beta, (0.3 + 1.0) / 2.0, atol=1e-15)

    def test_degenerate_range(self):
        explorer = make_explorer(beta_lo=1.0)
        s = make_rng(5).standard_normal(6)
        assert np.allclose(explorer.predict_beta(s), 1.0, atol=1e-15)
        assert np.allclose(explorer.scaling_vector(s), 1.0, atol=1e-15)

    def test_saturated_head_reaches_one(self):
        explorer = make_explorer(beta_lo=0.3, zero_net=True)
        explorer.net.biases[-1][...] = 100.0  # tanh -> 1 exactly
        beta = explorer.predict_beta(np.zeros(6))
        assert np.allclose(beta, 1.0, atol=1e-12)

    def test_range_containment(self):
        explorer = make_explorer(seed=3, beta_lo=0.25)
        for seed in range(10):
            s = make_rng(seed).standard_normal(6)
            beta = explorer.predict_beta(s)
            assert np.all(beta >= 0.25 - 1e-12)
            assert np.all(beta <= 1.0 + 1e-12)

    def test_beta_lo_validation(self):
        with pytest.raises(ValueError):
            make_explorer(beta_lo=1.5)


class TestAssembleScaling:
    def test_layout(self):
        xi = assemble_scaling(np.array([0.4, 0.9]), 3)
        assert np.array_equal(xi[:3], np.ones(3))
        assert np.array_equal(xi[3:], [0.4, 0.4, 0.9, 0.9])

    def test_pairs_exactly_equal(self, rng):
        beta = rng.uniform(0.3, 1.0, 5)
        xi = assemble_scaling(beta, 4)
        assert np.array_equal(xi[4::2], xi[5::2])


class TestPerturb:
    def test_lambda_zero_identity(self, rng):
        a = rng.uniform(-1, 1, 10)
        xi = assemble_scaling(rng.uniform(0.3, 1.0, 3), 4)
        assert np.array_equal(perturb(a, xi, 0.0), a)

    def test_full_strength_scaling(self, rng):
        a = rng.uniform(-1, 1, 8)
        xi = assemble_scaling(np.full(2, 0.5), 4)
        out = perturb(a, xi, 1.0)
        assert np.array_equal(out[:4], a[:4])
        assert np.allclose(out[4:], 0.5 * a[4:], atol=1e-15)

    def test_half_strength_multiplier(self, rng):
        a = rng.uniform(-1, 1, 8)
        xi = assemble_scaling(np.full(2, 0.5), 4)
        out = perturb(a, xi, 0.5)
        assert np.allclose(out[4:], 0.75 * a[4:], atol=1e-15)

    def test_literal_mode(self, rng):
        a = rng.uniform(-1, 1, 8)
        xi = assemble_scaling(np.full(2, 0.5), 4)
        out = perturb(a, xi, 0.4, mode="literal")
        assert np.allclose(out[:4], 0.4 * a[:4], atol=1e-15)
        assert np.allclose(out[4:], 0.2 * a[4:], atol=1e-15)

    def test_lambda_domain_error(self, rng):
        a = rng.uniform(-1, 1, 8)
        xi = np.ones(8)
        with pytest.raises(ValueError):
            perturb(a, xi, 1.2)
        with pytest.raises(ValueError):
            perturb(a, xi, -0.1)

    @given(st.floats(0, 1), st.integers(0, 50))
    @settings(max_examples=40)
    def test_blended_invariants(self, lam, seed):
        rng = make_rng(seed)
        a = rng.uniform(-1, 1, 10)
        beta = rng.uniform(0.2, 1.0, 3)
        xi = assemble_scaling(beta, 4)
        out = perturb(a, xi, lam)
        # beamformer slice untouched bit-for-bit, moduli never grow
        assert np.array_equal(out[:4], a[:4])
        assert np.all(np.abs(out[4:]) <= np.abs(a[4:]) + 1e-15)
        # pairwise scaling keeps the complex argument of each element
        pairs_in = a[4::2] + 1j * a[5::2]
        pairs_out = out[4::2] + 1j * out[5::2]
        mask = np.abs(pairs_in) > 1e-9
        assert np.allclose(np.angle(pairs_out[mask]),
                           np.angle(pairs_in[mask]), atol=1e-12)


class TestActScales:
    def test_multiplier_matches_generic_perturb(self):
        explorer = make_explorer(seed=9)
        s = make_rng(2).standard_normal(6)
        a = make_rng(3).uniform(-1, 1, 10)
        mult, phase_scale = explorer.act_scales(s, 0.25)
        via_op = perturb(a, explorer.scaling_vector(s), 0.25)
        assert np.allclose(a * mult, via_op, atol=1e-15)
        assert np.array_equal(mult[4::2], phase_scale)
        assert np.array_equal(mult[5::2], phase_scale)


def agent_for_explorer(seed, ds, da):
    rngs = spawn_rngs(seed, 7)
    hp = small_hp(hidden=16, batch_size=4)
    return SacAgent(ds, da, hp, (rngs[1], rngs[2], rngs[3]), rngs[5], rngs[6])


class TestExplorerUpdate:
    def test_constant_critics_no_change(self):
        ds, n_prefix, n_el = 6, 4, 3
        da = n_prefix + 2 * n_el
        agent = agent_for_explorer(1, ds, da)
        agent.critic1.params[...] = 0.0
        agent.critic2.params[...] = 0.0
        explorer = make_explorer(seed=2, state_dim=ds)
        before = explorer.net.params.copy()
        batch = random_batch(agent, 4)
        explorer.ascend_td_error(agent, batch, np.zeros(4), 0.3)
        assert np.array_equal(explorer.net.params, before)

    def test_lambda_zero_no_change(self):
        ds, da = 6, 10
        agent = agent_for_explorer(3, ds, da)
        explorer = make_explorer(seed=4, state_dim=ds)
        before = explorer.net.params.copy()
        batch = random_batch(agent, 4)
        explorer.ascend_td_error(agent, batch, np.zeros(4), 0.0)
        assert np.array_equal(explorer.net.params, before)

    def test_target_net_untouched_by_ascent(self):
        ds, da = 6, 10
        agent = agent_for_explorer(5, ds, da)
        explorer = make_explorer(seed=6, state_dim=ds)
        before = explorer.target_net.params.copy()
        batch = random_batch(agent, 4)
        explorer.ascend_td_error(agent, batch, np.zeros(4), 0.3)
        assert np.array_equal(explorer.target_net.params, before)
        explorer.polyak(0.5)
        assert not np.array_equal(explorer.target_net.params, before)

    def test_objective_increases_on_frozen_quadratic_critic(self):
        ds, n_prefix, n_el = 6, 4, 3
        da = n_prefix + 2 * n_el
        agent = agent_for_explorer(7, ds, da)
        center = np.tanh(make_rng(8).standard_normal(da))
        agent.critic1 = QuadraticCritic(ds, center)
        agent.critic2 = QuadraticCritic(ds, -center)
        explorer = make_explorer(seed=9, state_dim=ds)
        batch = random_batch(agent, 4)
        y = np.zeros(4)
        losses = [explorer.ascend_td_error(agent, batch, y, 0.8)
                  for _ in range(100)]
        assert np.mean(losses[-10:]) > np.mean(losses[:10])

    def test_gradient_matches_finite_differences(self):
        ds, n_prefix, n_el = 6, 4, 3
        da = n_prefix + 2 * n_el
        agent = agent_for_explorer(10, ds, da)
        explorer = make_explorer(seed=11, state_dim=ds)
        batch = random_batch(agent, 4)
        y = make_rng(12).standard_normal(4)
        lam = 0.7
        _, analytic = explorer.td_error_grads(agent, batch, y, lam)
        analytic = analytic.copy()

        def objective():
            n = batch.s.shape[0]
            mult = explorer.multiplier_batch(batch.s, lam)
            q1, q2, _ = agent.critic_pair_eval(batch.s, batch.a * mult)
            return float(np.mean((q1 - y) ** 2) + np.mean((q2 - y) ** 2))

        coords = make_rng(13).choice(explorer.net.n_params, 60, replace=False)
        numeric = central_diff(objective, explorer.net.params, coords)
        assert relative_error(analytic[coords], numeric) < 1e-4


class TestTrainLoopIntegration:
    def test_explorer_run_trains_and_decays(self):
        from rislab.sac import train_loop
        env, agent, explorer, schedule = build_run(21, with_explorer=True,
                                                   steps=150)
        record = train_loop(env, agent, 150, explorer, schedule)
        assert record.lam[0] == pytest.approx(0.3)
        assert record.lam[-1] < record.lam[0]
        assert np.isfinite(record.true_sum_rate).all()

    def test_perturbed_rewards_differ_from_raw(self):
        from rislab.sac import train_loop
        cfg = small_config(scenario="mismatch", beta_min=0.3)
        env1, agent1, explorer, schedule = build_run(22, cfg=cfg,
                                                     with_explorer=True,
                                                     lam0=0.3, steps=100)
        r_pert = train_loop(env1, agent1, 100, explorer, schedule)
        env2, agent2, _, _ = build_run(22, cfg=cfg)
        r_raw = train_loop(env2, agent2, 100)
        assert not np.array_equal(r_pert.training_reward,
                                  r_raw.training_reward)
