"""Instance generation, context serving, outcome sampling, kappa search."""
import math

import numpy as np
import pytest

from mnl_bandit.choice import AssortmentContexts
from mnl_bandit.simulator import (
    FIXED_POOL,
    FRESH_IID,
    Instance,
    InstanceConfig,
    environment_step,
    estimate_kappa,
    kappa_over_candidates,
    kappa_theta_candidates,
    make_instance,
    sample_ball,
    serve_contexts,
    stream,
)


class TestMakeInstance:
    def test_deterministic_per_seed(self):
        cfg = InstanceConfig(d=3, N=5, K=2)
        a = make_instance(cfg, 7)
        b = make_instance(cfg, 7)
        np.testing.assert_array_equal(a.theta_star, b.theta_star)
        np.testing.assert_array_equal(a.pool, b.pool)

    def test_norm_bounds_hold(self):
        cfg = InstanceConfig(d=4, N=6, K=3, S=2.0, S_true=1.5)
        for seed in range(1000):
            inst = make_instance(cfg, seed)
            assert np.linalg.norm(inst.theta_star) <= 1.5 + 1e-12
            assert np.linalg.norm(inst.pool, axis=1).max() <= 1.0 + 1e-12

    def test_ball_sampler_mean_zero(self):
        rng = np.random.default_rng(0)
        draws = sample_ball(rng, 10_000, 3)
        assert np.abs(draws.mean(axis=0)).max() < 0.02

    def test_rejects_s_true_above_s(self):
        with pytest.raises(ValueError, match="S_true"):
            InstanceConfig(S=1.0, S_true=2.0)


class TestServeContexts:
    def test_fixed_pool_is_constant(self):
        inst = make_instance(InstanceConfig(context_mode=FIXED_POOL), 3)
        np.testing.assert_array_equal(serve_contexts(inst, 1), serve_contexts(inst, 999))

    def test_fresh_iid_changes_and_replays(self):
        inst = make_instance(InstanceConfig(context_mode=FRESH_IID), 3)
        c1 = serve_contexts(inst, 1)
        c2 = serve_contexts(inst, 2)
        assert not np.array_equal(c1, c2)
        np.testing.assert_array_equal(c1, serve_contexts(inst, 1))
        assert np.linalg.norm(c1, axis=1).max() <= 1.0 + 1e-12

    def test_rejects_round_zero(self):
        inst = make_instance(InstanceConfig(), 0)
        with pytest.raises(ValueError):
            serve_contexts(inst, 0)


class TestEnvironmentStep:
    def test_deterministic_given_stream(self):
        inst = make_instance(InstanceConfig(), 5)
        ass = AssortmentContexts.from_pool(inst.pool, (0, 1))
        outs1 = [environment_step(inst, ass, stream(5, 2, t)) for t in range(50)]
        outs2 = [environment_step(inst, ass, stream(5, 2, t)) for t in range(50)]
        assert outs1 == outs2

    def test_deeply_negative_utility_never_sells(self):
        inst = Instance(
            d=1, N=1, K=1, S=50.0, S_true=50.0,
            theta_star=np.array([-50.0]), context_mode=FIXED_POOL,
            pool=np.array([[1.0]]), prices=np.ones(1), seed=0,
        )
        ass = AssortmentContexts.from_pool(inst.pool, (0,))
        rng = np.random.default_rng(1)
        outcomes = [environment_step(inst, ass, rng) for _ in range(10_000)]
        assert np.mean([o == 0 for o in outcomes]) > 0.999

    def test_symmetric_assortment_quarters(self):
        inst = Instance(
            d=2, N=3, K=3, S=1.0, S_true=1.0,
            theta_star=np.zeros(2), context_mode=FIXED_POOL,
            pool=np.zeros((3, 2)), prices=np.ones(3), seed=0,
        )
        ass = AssortmentContexts.from_pool(inst.pool, (0, 1, 2))
        rng = np.random.default_rng(2)
        counts = np.bincount(
            [environment_step(inst, ass, rng) for _ in range(100_000)], minlength=4
        )
        np.testing.assert_allclose(counts / 100_000, 0.25, atol=0.01)


class TestKappa:
    def test_forced_origin_single_item(self):
        inst = Instance(
            d=1, N=1, K=1, S=0.0, S_true=0.0,
            theta_star=np.zeros(1), context_mode=FIXED_POOL,
            pool=np.array([[1.0]]), prices=np.ones(1), seed=0,
        )
        est = estimate_kappa(inst, grid_size=16)
        assert est.value == pytest.approx(4.0, rel=1e-12)

    def test_forced_origin_k_items(self):
        for K in (2, 3, 4):
            inst = Instance(
                d=2, N=K, K=K, S=0.0, S_true=0.0,
                theta_star=np.zeros(2), context_mode=FIXED_POOL,
                pool=np.tile([[0.5, 0.0]], (K, 1)), prices=np.ones(K), seed=0,
            )
            est = estimate_kappa(inst, grid_size=16)
            assert est.value == pytest.approx((K + 1) ** 2 / K, rel=1e-12)

    def test_single_item_reaches_directed_extreme(self):
        inst = Instance(
            d=1, N=1, K=1, S=2.0, S_true=2.0,
            theta_star=np.zeros(1), context_mode=FIXED_POOL,
            pool=np.array([[1.0]]), prices=np.ones(1), seed=0,
        )
        est = estimate_kappa(inst, grid_size=64)
        sig = 1.0 / (1.0 + math.exp(-2.0))
        assert est.value == pytest.approx(1.0 / (sig * (1.0 - sig)), rel=1e-9)

    def test_always_at_least_four(self):
        for seed in range(20):
            inst = make_instance(InstanceConfig(d=2, N=4, K=2, S=1.0), seed)
            assert estimate_kappa(inst, grid_size=32).value >= 4.0

    def test_nondecreasing_on_nested_candidate_sets(self):
        inst_small = make_instance(InstanceConfig(d=2, N=4, K=2, S=1.0, S_true=1.0), 11)
        inst_big = Instance(
            d=2, N=4, K=2, S=2.0, S_true=1.0,
            theta_star=inst_small.theta_star, context_mode=FIXED_POOL,
            pool=inst_small.pool, prices=inst_small.prices, seed=11,
        )
        thetas_small = kappa_theta_candidates(inst_small, 64, inst_small.pool)
        extremes_big = kappa_theta_candidates(inst_big, 0, inst_big.pool)
        thetas_big = np.vstack([thetas_small, extremes_big])
        k_small = kappa_over_candidates(inst_small, thetas_small, inst_small.pool)
        k_big = kappa_over_candidates(inst_big, thetas_big, inst_big.pool)
        assert k_big.value >= k_small.value

    def test_fresh_iid_uses_sampled_pool(self):
        inst = make_instance(InstanceConfig(d=2, N=4, K=2, context_mode=FRESH_IID), 3)
        est = estimate_kappa(inst, grid_size=16)
        assert est.value >= 4.0


class TestSerialization:
    def test_round_trip_reproduces_streams(self, tmp_path):
        inst = make_instance(InstanceConfig(d=3, N=5, K=2), 13)
        path = tmp_path / "instance.json"
        inst.save(path)
        clone = Instance.load(path)
        np.testing.assert_array_equal(inst.theta_star, clone.theta_star)
        np.testing.assert_array_equal(inst.pool, clone.pool)
        ass = AssortmentContexts.from_pool(inst.pool, (0, 2))
        for t in range(30):
            a = environment_step(inst, ass, stream(inst.seed, 2, t))
            b = environment_step(clone, ass, stream(clone.seed, 2, t))
            assert a == b

    def test_fresh_iid_round_trip(self, tmp_path):
        inst = make_instance(InstanceConfig(d=2, N=3, K=1, context_mode=FRESH_IID), 17)
        path = tmp_path / "inst.json"
        inst.save(path)
        clone = Instance.load(path)
        assert clone.pool is None
        np.testing.assert_array_equal(serve_contexts(inst, 9), serve_contexts(clone, 9))
