import numpy as np
import pytest

from netrmab.core import ArmModel, Cohort, CostModel, sample_arm, sample_cohort
from netrmab.graph import DiGraph
from netrmab.policies import NoActPolicy, Policy, RandomPolicy, TWPolicy
from netrmab.sim import (
    FeasibilityError,
    check_feasibility,
    initial_states,
    intervention_benefit,
    run_batch,
    run_episode,
    summarize,
    transition,
)
from netrmab.whittle import build_table


def clamped_cohort(n, p_up, horizon, budget_milli=0):
    """Cohort of degenerate arms whose up-probability is p_up everywhere.

    Bypasses structural validity on purpose: it makes episode rewards exact.
    """
    t = np.empty((3, 2, 2))
    t[:, :, 1] = p_up
    t[:, :, 0] = 1.0 - p_up
    arms = tuple(ArmModel(transitions=t, id=i) for i in range(n))
    return Cohort(arms=arms, budget_milli=budget_milli, horizon=horizon)


class TestCheckFeasibility:
    def setup_method(self):
        self.cohort = sample_cohort(np.random.default_rng(0), 3, psi_milli=500, budget_milli=1500)
        self.graph = DiGraph(3, [(0, 1)])

    def test_valid_spend_returned(self):
        assert check_feasibility(np.array([2, 1, 0]), self.graph, self.cohort) == 1500

    def test_wrong_shape(self):
        with pytest.raises(FeasibilityError):
            check_feasibility(np.array([2, 0]), self.graph, self.cohort)

    def test_non_action_value(self):
        with pytest.raises(FeasibilityError):
            check_feasibility(np.array([3, 0, 0]), self.graph, self.cohort)

    def test_budget_exceeded(self):
        with pytest.raises(FeasibilityError):
            check_feasibility(np.array([2, 0, 2]), self.graph, self.cohort)

    def test_message_without_pulled_in_neighbor(self):
        with pytest.raises(FeasibilityError):
            check_feasibility(np.array([0, 1, 2]), self.graph, self.cohort)


class TestTransition:
    def test_frequency_matches_probability(self):
        arm = sample_arm(np.random.default_rng(1))
        p = arm.p_up(0, 2)
        rng = np.random.default_rng(2)
        trials = 100_000
        ups = sum(transition(arm, 0, 2, rng) for _ in range(trials))
        sd = np.sqrt(trials * p * (1 - p))
        assert abs(ups - trials * p) < 3.5 * sd

    def test_degenerate_probabilities(self):
        rng = np.random.default_rng(3)
        arm = clamped_cohort(1, 1.0, 1).arms[0]
        assert all(transition(arm, 0, 0, rng) == 1 for _ in range(50))
        arm = clamped_cohort(1, 0.0, 1).arms[0]
        assert all(transition(arm, 1, 0, rng) == 0 for _ in range(50))


class TestRunEpisode:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        cohort = sample_cohort(rng, 5, budget_milli=2000, horizon=15)
        g = DiGraph(5, [(0, 1), (2, 3)])
        policy = RandomPolicy(cohort, g)
        a = run_episode(cohort, g, policy, seed=123)
        b = run_episode(cohort, g, policy, seed=123)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.actions, b.actions)
        assert a.reward == b.reward

    def test_different_seeds_differ(self):
        rng = np.random.default_rng(5)
        cohort = sample_cohort(rng, 8, horizon=20)
        policy = NoActPolicy(8)
        a = run_episode(cohort, DiGraph(8), policy, seed=0)
        b = run_episode(cohort, DiGraph(8), policy, seed=1)
        assert not np.array_equal(a.states, b.states)

    def test_reward_is_sum_of_post_transition_states(self):
        cohort = sample_cohort(np.random.default_rng(6), 4, horizon=10)
        ep = run_episode(cohort, DiGraph(4), NoActPolicy(4), seed=7)
        assert ep.states.shape == (10, 4)
        assert ep.reward == ep.states.sum()
        assert 0 <= ep.reward <= 40
        assert ep.initial_states.shape == (4,)

    def test_absorbing_up_chain_scores_full(self):
        cohort = clamped_cohort(3, 1.0, 12)
        ep = run_episode(cohort, DiGraph(3), NoActPolicy(3), seed=0, init="all1")
        assert ep.reward == 3 * 12

    def test_dead_chain_scores_zero(self):
        cohort = clamped_cohort(3, 0.0, 12)
        ep = run_episode(cohort, DiGraph(3), NoActPolicy(3), seed=0, init="all0")
        assert ep.reward == 0

    def test_transitions_independent_of_policy_rng_use(self):
        # two policies with identical action choices but different policy-rng
        # consumption must see identical environment draws (common random
        # numbers across policies)
        class GreedyNoDraw(Policy):
            name = "a"

            def step(self, states, rng):
                return np.zeros(len(states), dtype=np.int8)

        class GreedyManyDraws(Policy):
            name = "b"

            def step(self, states, rng):
                rng.random(1000)
                return np.zeros(len(states), dtype=np.int8)

        cohort = sample_cohort(np.random.default_rng(7), 6, horizon=25)
        g = DiGraph(6)
        a = run_episode(cohort, g, GreedyNoDraw(), seed=99)
        b = run_episode(cohort, g, GreedyManyDraws(), seed=99)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.initial_states, b.initial_states)

    def test_infeasible_policy_rejected(self):
        class OverBudget(Policy):
            name = "bad"

            def step(self, states, rng):
                return np.full(len(states), 2, dtype=np.int8)

        cohort = sample_cohort(np.random.default_rng(8), 3, budget_milli=1000, horizon=5)
        with pytest.raises(FeasibilityError):
            run_episode(cohort, DiGraph(3), OverBudget(), seed=0)

    def test_max_spend_recorded(self):
        cohort = sample_cohort(np.random.default_rng(9), 4, budget_milli=2000, horizon=8)
        table = build_table(cohort)
        ep = run_episode(cohort, DiGraph(4), TWPolicy(cohort, DiGraph(4), table=table), seed=3)
        assert ep.max_spend_milli == 2000


class TestInitialStates:
    def test_modes(self):
        cohort = sample_cohort(np.random.default_rng(10), 6)
        rng = np.random.default_rng(0)
        assert np.all(initial_states(cohort, rng, "all0") == 0)
        assert np.all(initial_states(cohort, rng, "all1") == 1)
        u = initial_states(cohort, rng, "uniform")
        assert set(np.unique(u)) <= {0, 1}
        with pytest.raises(ValueError):
            initial_states(cohort, rng, "warm")


class TestBatch:
    def test_summary_arithmetic(self):
        res = summarize("tw", np.array([1.0, 2.0, 3.0]), [0, 1, 2], 1000)
        assert res.mean == pytest.approx(2.0)
        assert res.ci95 == pytest.approx(1.96 * 1.0 / np.sqrt(3))
        assert res.n_seeds == 3

    def test_needs_two_seeds(self):
        cohort = sample_cohort(np.random.default_rng(11), 2, horizon=3)
        with pytest.raises(ValueError):
            run_batch(cohort, DiGraph(2), NoActPolicy(2), seeds=[0])

    def test_batch_matches_episode_rewards(self):
        cohort = sample_cohort(np.random.default_rng(12), 3, horizon=6)
        g = DiGraph(3)
        policy = NoActPolicy(3)
        res = run_batch(cohort, g, policy, seeds=range(5))
        singles = [run_episode(cohort, g, policy, s).reward for s in range(5)]
        assert np.array_equal(res.rewards, np.array(singles, dtype=float))

    def test_seed_isolation(self):
        # a seed's episode does not depend on which other seeds ran before it
        cohort = sample_cohort(np.random.default_rng(13), 3, horizon=6)
        g = DiGraph(3)
        policy = NoActPolicy(3)
        a = run_batch(cohort, g, policy, seeds=[4, 5])
        b = run_batch(cohort, g, policy, seeds=[5, 4])
        assert a.rewards[0] == b.rewards[1]
        assert a.rewards[1] == b.rewards[0]


class TestInterventionBenefit:
    def test_basic_value(self):
        assert intervention_benefit(5.0, 2.0, 6.0) == pytest.approx(75.0)

    def test_reference_policy_is_100(self):
        assert intervention_benefit(6.0, 2.0, 6.0) == pytest.approx(100.0)

    def test_noact_is_0(self):
        assert intervention_benefit(2.0, 2.0, 6.0) == pytest.approx(0.0)

    def test_zero_denominator_is_nan(self):
        assert np.isnan(intervention_benefit(3.0, 2.0, 2.0))
