"""Assortment enumeration and decision steps."""
import numpy as np
import pytest

from mnl_bandit.choice import AssortmentContexts, expected_revenue
from mnl_bandit.confidence import ConfidenceConfig, build_confidence_state, in_set_E
from mnl_bandit.estimation import History, matrix_V
from mnl_bandit.policy import (
    ConfigurationError,
    bonus_ucb_step,
    cb_mnl_step,
    enumerate_assortments,
    oracle_assortment,
    random_assortment,
)
from mnl_bandit.simulator import sample_ball


def make_assortment(contexts):
    contexts = np.atleast_2d(np.asarray(contexts, dtype=float))
    return AssortmentContexts(tuple(range(contexts.shape[0])), contexts, np.ones(contexts.shape[0]))


class TestEnumeration:
    def test_three_choose_up_to_two(self):
        got = enumerate_assortments(3, 2)
        assert got == [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]

    def test_single_item_universe(self):
        assert enumerate_assortments(1, 1) == [(0,)]

    def test_ten_choose_up_to_three_counts(self):
        assert len(enumerate_assortments(10, 3)) == 10 + 45 + 120

    def test_guard_trips_on_blowup(self):
        with pytest.raises(ConfigurationError, match="guard"):
            enumerate_assortments(100, 12)

    def test_bad_cardinality(self):
        with pytest.raises(ValueError):
            enumerate_assortments(3, 0)
        with pytest.raises(ValueError):
            enumerate_assortments(3, 4)


class TestOracle:
    def test_equal_utilities_tie_break_to_first_block(self):
        pool = np.tile(np.array([[0.3, 0.1]]), (4, 1))
        assert oracle_assortment(pool, np.array([1.0, 0.0]), 2) == (0, 1)

    def test_full_cardinality_takes_everything(self):
        rng = np.random.default_rng(0)
        pool = sample_ball(rng, 4, 2)
        theta = np.array([0.5, -0.25])
        assert oracle_assortment(pool, theta, 4) == (0, 1, 2, 3)

    def test_brute_force_agrees_with_top_k_by_utility(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            d = int(rng.integers(1, 4))
            N = int(rng.integers(2, 6))
            K = int(rng.integers(1, N + 1))
            pool = sample_ball(rng, N, d)
            theta = sample_ball(rng, 1, d, radius=2.0)[0]
            utils = pool @ theta
            top = tuple(sorted(np.argsort(-utils)[:K]))
            assert oracle_assortment(pool, theta, K) == top


class TestCbMnlStep:
    def setup_method(self):
        self.rng = np.random.default_rng(2)
        self.cfg = ConfidenceConfig(d=2, K=2, T=50, delta=0.1, lam=2.0, S=1.0)

    def _state(self, hist):
        return build_confidence_state(hist, self.cfg, t=hist.t + 1)

    def _burn_in(self, pool, rounds, seed=0):
        rng = np.random.default_rng(seed)
        hist = History(2)
        theta_star = np.array([0.8, -0.3])
        from mnl_bandit.choice import choice_probabilities, sample_choice

        for _ in range(rounds):
            a = random_assortment(pool.shape[0], 2, rng)
            ass = AssortmentContexts.from_pool(pool, a)
            hist.append(ass, sample_choice(choice_probabilities(ass, theta_star), rng))
        return hist, theta_star

    def test_single_feasible_assortment(self):
        cfg = ConfidenceConfig(d=2, K=1, T=50, delta=0.1, lam=2.0, S=1.0)
        pool = np.array([[0.5, 0.1]])
        hist = History(2)
        state = build_confidence_state(hist, cfg, t=1)
        decision = cb_mnl_step(pool, hist, cfg, state, rng=self.rng)
        assert decision.assortment.indices == (0,)

    def test_symmetric_contexts_tie_break_to_prefix(self):
        pool = np.tile(np.array([[0.4, 0.2]]), (4, 1))
        hist = History(2)
        state = self._state(hist)
        decision = cb_mnl_step(pool, hist, cfg=self.cfg, state=state,
                               rng=np.random.default_rng(3), refine_top=0, n_dirs=6)
        assert decision.assortment.indices == (0, 1)

    def test_value_attained_by_returned_parameter(self):
        pool = sample_ball(self.rng, 4, 2)
        hist, _ = self._burn_in(pool, 12)
        state = self._state(hist)
        for refine_top in (None, 1, 0):
            decision = cb_mnl_step(pool, hist, self.cfg, state,
                                   rng=np.random.default_rng(4),
                                   refine_top=refine_top, n_dirs=6, restarts=2)
            got = expected_revenue(decision.assortment, decision.theta_used)
            assert decision.optimistic_value == pytest.approx(got, abs=1e-9)
            assert in_set_E(decision.theta_used, hist, self.cfg, state)

    def test_optimism_dominates_truth_when_covered(self):
        pool = sample_ball(np.random.default_rng(5), 4, 2)
        hist, theta_star = self._burn_in(pool, 25, seed=6)
        state = self._state(hist)
        if not in_set_E(theta_star, hist, self.cfg, state):
            pytest.skip("reference parameter not covered in this draw")
        best = oracle_assortment(pool, theta_star, 2)
        truth = expected_revenue(AssortmentContexts.from_pool(pool, best), theta_star)
        decision = cb_mnl_step(pool, hist, self.cfg, state,
                               rng=np.random.default_rng(7), refine_top=None, restarts=4)
        assert decision.optimistic_value >= truth - 1e-9

    def test_deterministic_given_seed(self):
        pool = sample_ball(np.random.default_rng(8), 4, 2)
        hist, _ = self._burn_in(pool, 10, seed=9)
        state = self._state(hist)
        d1 = cb_mnl_step(pool, hist, self.cfg, state, rng=np.random.default_rng(11),
                         refine_top=1, n_dirs=6)
        d2 = cb_mnl_step(pool, hist, self.cfg, state, rng=np.random.default_rng(11),
                         refine_top=1, n_dirs=6)
        assert d1.assortment.indices == d2.assortment.indices
        assert d1.optimistic_value == d2.optimistic_value
        np.testing.assert_array_equal(d1.theta_used, d2.theta_used)

    def test_c_set_variant_returns_member_value(self):
        from mnl_bandit.confidence import in_set_C

        pool = sample_ball(np.random.default_rng(12), 3, 2)
        hist, _ = self._burn_in(pool, 15, seed=13)
        state = self._state(hist)
        decision = cb_mnl_step(pool, hist, self.cfg, state, set_kind="C",
                               rng=np.random.default_rng(14), c_samples=256)
        got = expected_revenue(decision.assortment, decision.theta_used)
        assert decision.optimistic_value == pytest.approx(got, abs=1e-9)
        assert in_set_C(decision.theta_used, hist, self.cfg, state)

    def test_unknown_set_kind(self):
        hist = History(2)
        state = self._state(hist)
        with pytest.raises(ValueError, match="set kind"):
            cb_mnl_step(np.zeros((2, 2)), hist, self.cfg, state, set_kind="X")


class TestBonusUcb:
    def setup_method(self):
        self.cfg = ConfidenceConfig(d=2, K=2, T=50, delta=0.1, lam=2.0, S=1.0)

    def test_symmetric_contexts_match_optimistic_choice(self):
        pool = np.tile(np.array([[0.4, 0.2]]), (3, 1))
        hist = History(2)
        state = build_confidence_state(hist, self.cfg, t=1)
        bonus = bonus_ucb_step(pool, hist, self.cfg, state, kappa_hat=5.0)
        optimistic = cb_mnl_step(pool, hist, self.cfg, state,
                                 rng=np.random.default_rng(0), refine_top=0, n_dirs=4)
        assert bonus.assortment.indices == optimistic.assortment.indices == (0, 1)

    def test_bonus_is_nonnegative(self):
        rng = np.random.default_rng(15)
        pool = sample_ball(rng, 4, 2)
        hist = History(2)
        for _ in range(10):
            hist.append(AssortmentContexts.from_pool(pool, (0, 1)), 0)
        state = build_confidence_state(hist, self.cfg, t=hist.t + 1)
        decision = bonus_ucb_step(pool, hist, self.cfg, state, kappa_hat=6.0)
        base = expected_revenue(decision.assortment, state.theta_hat)
        assert decision.optimistic_value >= base - 1e-12

    def test_repeated_context_bonus_shrinks(self):
        pool = np.array([[0.6, 0.2], [-0.1, 0.4]])
        ass = AssortmentContexts.from_pool(pool, (0, 1))

        def v_term(hist):
            v = matrix_V(hist, self.cfg.lam)
            return sum(v.inv_quad(x) for x in pool)

        hist = History(2)
        for _ in range(10):
            hist.append(ass, 0)
        early = v_term(hist)
        for _ in range(990):
            hist.append(ass, 0)
        late = v_term(hist)
        assert late < early


class TestRandomAssortment:
    def test_uniform_and_deterministic(self):
        picks1 = [random_assortment(3, 2, np.random.default_rng(7)) for _ in range(5)]
        picks2 = [random_assortment(3, 2, np.random.default_rng(7)) for _ in range(5)]
        assert picks1 == picks2
        rng = np.random.default_rng(8)
        seen = {random_assortment(3, 2, rng) for _ in range(500)}
        assert seen == set(enumerate_assortments(3, 2))
