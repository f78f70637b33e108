import itertools

import numpy as np
import pytest

from netrmab.core import MESSAGE, NOACT, PULL, Cohort, CostModel, sample_cohort
from netrmab.graph import DiGraph, sbm_generate, uniform_block_sizes
from netrmab.policies import (
    MAX_ENUM_N,
    CWRandomPolicy,
    MyopicPolicy,
    NoActPolicy,
    RandomPolicy,
    ResourceError,
    TWPolicy,
    VIPolicy,
    _bitmask,
    build_system_mdp,
    enumerate_feasible,
    make_policy,
    tw_step,
    vi_solve,
)
from netrmab.sim import check_feasibility
from netrmab.whittle import build_table


def replace_budget_psi(cohort, budget_milli, psi_milli):
    from dataclasses import replace

    return replace(cohort, budget_milli=budget_milli, cost_model=CostModel(psi_milli=psi_milli))


class TestFeasibilityFuzz:
    def test_all_heuristics_emit_feasible_actions(self):
        rng = np.random.default_rng(0)
        for trial in range(25):
            n = int(rng.integers(2, 12))
            cohort = sample_cohort(
                rng,
                n,
                psi_milli=int(rng.integers(0, 1000)),
                budget_milli=int(rng.integers(0, 5000)),
            )
            graph = sbm_generate(
                uniform_block_sizes(n), float(rng.uniform(0, 0.8)), float(rng.uniform(0, 0.5)), rng
            )
            table = build_table(cohort)
            states = rng.integers(0, 2, n)
            for name in ("noact", "random", "cwrandom", "myopic", "tw", "greta"):
                policy = make_policy(name, cohort, graph, table=table)
                a = policy.step(states.copy(), rng)
                check_feasibility(a, graph, cohort)


class TestNoAct:
    def test_always_zero(self):
        p = NoActPolicy(5)
        a = p.step(np.ones(5, dtype=np.int8), np.random.default_rng(0))
        assert np.all(a == NOACT)


class TestRandomPolicies:
    def test_random_spends_until_exhausted(self):
        # with an edgeless graph and integer budget, random always pulls k arms
        rng = np.random.default_rng(1)
        cohort = sample_cohort(rng, 6, psi_milli=500, budget_milli=3000)
        p = RandomPolicy(cohort, DiGraph(6))
        for _ in range(10):
            a = p.step(np.zeros(6, dtype=np.int8), rng)
            assert int(np.sum(a == PULL)) == 3
            assert int(np.sum(a == MESSAGE)) == 0

    def test_cwrandom_prefers_high_out_degree(self):
        # star graph: center has out-degree 4, leaves 0. With B=1 only the 5
        # placeholder edges are affordable; the center's carries weight 1+4
        # versus 1 for each leaf, so P(center) = 5/9 (uniform would give 1/5).
        n = 5
        g = DiGraph(n, [(0, v) for v in range(1, n)])
        cohort = sample_cohort(np.random.default_rng(2), n, psi_milli=500, budget_milli=1000)
        p = CWRandomPolicy(cohort, g)
        rng = np.random.default_rng(3)
        trials = 4000
        center = 0
        for _ in range(trials):
            a = p.step(np.zeros(n, dtype=np.int8), rng)
            assert int(np.sum(a == PULL)) == 1
            center += int(a[0] == PULL)
        p_center = 5.0 / 9.0
        sd = np.sqrt(trials * p_center * (1 - p_center))
        assert abs(center - trials * p_center) < 4 * sd

    def test_random_uniform_over_first_edges(self):
        # edgeless n=4, B=1: first pull should be uniform over the 4 arms
        rng = np.random.default_rng(4)
        cohort = sample_cohort(rng, 4, psi_milli=500, budget_milli=1000)
        p = RandomPolicy(cohort, DiGraph(4))
        counts = np.zeros(4)
        trials = 4000
        for _ in range(trials):
            a = p.step(np.zeros(4, dtype=np.int8), rng)
            counts[np.flatnonzero(a == PULL)[0]] += 1
        sd = np.sqrt(trials * 0.25 * 0.75)
        assert np.all(np.abs(counts - trials * 0.25) < 4 * sd)


def brute_force_best(cohort, graph, states):
    """Expected next-step reward of the best feasible joint action."""
    p_up = cohort.tensor()[:, :, :, 1]
    ar = np.arange(cohort.n)
    best = -np.inf
    for act in enumerate_feasible(graph, cohort.budget_milli, cohort.cost_model):
        best = max(best, float(p_up[ar, act.vector, states].sum()))
    return best


def expected_next(cohort, actions, states):
    p_up = cohort.tensor()[:, :, :, 1]
    return float(p_up[np.arange(cohort.n), actions, states].sum())


class TestMyopic:
    def test_matches_brute_force_single_pull(self):
        # B=1, psi=0.6: only single pulls are feasible, so greedy is exact
        rng = np.random.default_rng(5)
        for _ in range(20):
            cohort = sample_cohort(rng, 3, psi_milli=600, budget_milli=1000)
            g = DiGraph(3, [(0, 1), (1, 2), (2, 0)])
            states = rng.integers(0, 2, 3)
            a = MyopicPolicy(cohort, g).step(states, rng)
            assert expected_next(cohort, a, states) == pytest.approx(
                brute_force_best(cohort, g, states)
            )

    def test_never_beats_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            psi = int(rng.integers(0, 1000))
            cohort = sample_cohort(rng, 3, psi_milli=psi, budget_milli=int(rng.integers(0, 3500)))
            g = sbm_generate([3], float(rng.uniform(0, 1)), 0.0, rng)
            states = rng.integers(0, 2, 3)
            a = MyopicPolicy(cohort, g).step(states, rng)
            assert expected_next(cohort, a, states) <= brute_force_best(cohort, g, states) + 1e-12

    def test_raw_scores_variant_feasible(self):
        rng = np.random.default_rng(7)
        cohort = sample_cohort(rng, 5, psi_milli=400, budget_milli=2000)
        g = sbm_generate([5], 0.5, 0.0, rng)
        a = MyopicPolicy(cohort, g, raw_scores=True).step(np.zeros(5, dtype=np.int8), rng)
        check_feasibility(a, g, cohort)


class TestThresholdWhittle:
    def test_pulls_top_k(self):
        w2 = np.array([0.2, 0.9, 0.5, 0.7, 0.0])
        a = tw_step(np.zeros(5, dtype=np.int8), w2, 2000)
        assert a.tolist() == [0, 2, 0, 2, 0]

    def test_fractional_budget_floors(self):
        w2 = np.array([0.2, 0.9])
        a = tw_step(np.zeros(2, dtype=np.int8), w2, 1999)
        assert a.tolist() == [0, 2]

    def test_ties_break_by_arm_id(self):
        w2 = np.array([0.5, 0.5, 0.5])
        a = tw_step(np.zeros(3, dtype=np.int8), w2, 2000)
        assert a.tolist() == [2, 2, 0]

    def test_policy_uses_per_state_indices(self):
        rng = np.random.default_rng(8)
        cohort = sample_cohort(rng, 4, budget_milli=1000)
        table = build_table(cohort)
        p = TWPolicy(cohort, DiGraph(4), table=table)
        for states in itertools.product((0, 1), repeat=4):
            s = np.array(states, dtype=np.int8)
            a = p.step(s, rng)
            pulled = int(np.flatnonzero(a == PULL)[0])
            w2 = table.resolve(s, PULL)[:4]
            assert w2[pulled] == w2.max()


class TestEnumerateFeasible:
    def test_single_arm(self):
        acts = enumerate_feasible(DiGraph(1), 1000, CostModel(psi_milli=500))
        vecs = sorted(a.vector.tolist() for a in acts)
        assert vecs == [[0], [2]]

    def test_two_arms_one_edge(self):
        acts = enumerate_feasible(DiGraph(2, [(0, 1)]), 1500, CostModel(psi_milli=500))
        vecs = sorted(a.vector.tolist() for a in acts)
        assert vecs == [[0, 0], [0, 2], [2, 0], [2, 1]]
        costs = {tuple(a.vector.tolist()): a.cost_milli for a in acts}
        assert costs[(2, 1)] == 1500

    def test_zero_budget(self):
        acts = enumerate_feasible(DiGraph(3, [(0, 1)]), 0, CostModel(psi_milli=500))
        assert len(acts) == 1
        assert np.all(acts[0].vector == NOACT)

    def test_enumeration_size_guard(self):
        with pytest.raises(ResourceError):
            enumerate_feasible(DiGraph(MAX_ENUM_N + 1), 1000, CostModel(psi_milli=500))


def exact_policy_value(cohort, policy, beta):
    """Discounted value of a deterministic stationary policy by linear solve."""
    n = cohort.n
    tensor = cohort.tensor()
    n_states = 1 << n
    P = np.zeros((n_states, n_states))
    r = np.zeros(n_states)
    for s_idx in range(n_states):
        s = np.array([(s_idx >> i) & 1 for i in range(n)], dtype=np.int8)
        r[s_idx] = s.sum()
        a = policy.step(s.copy(), np.random.default_rng(0))
        for nxt in range(n_states):
            prob = 1.0
            for i in range(n):
                prob *= tensor[i, a[i], s[i], (nxt >> i) & 1]
            P[s_idx, nxt] = prob
    return np.linalg.solve(np.eye(n_states) - beta * P, r)


class TestValueIterationExact:
    def test_single_arm_matches_policy_enumeration(self):
        cohort = sample_cohort(np.random.default_rng(9), 1, budget_milli=1000)
        mdp = build_system_mdp(cohort, DiGraph(1))
        sol = vi_solve(mdp)
        # optimal value = max over the 4 deterministic (state -> pull?) policies
        arm = cohort.arms[0].transitions
        best = np.full(2, -np.inf)
        for choice in itertools.product((0, 2), repeat=2):
            P = np.stack([arm[choice[s], s] for s in (0, 1)])
            v = np.linalg.solve(np.eye(2) - cohort.beta * P, np.arange(2.0))
            best = np.maximum(best, v)
        assert sol.values == pytest.approx(best, abs=1e-4)

    def test_zero_budget_is_passive_chain(self):
        cohort = sample_cohort(np.random.default_rng(10), 2, budget_milli=0)
        mdp = build_system_mdp(cohort, DiGraph(2))
        assert len(mdp.actions) == 1
        sol = vi_solve(mdp)
        noact = NoActPolicy(2)
        v_passive = exact_policy_value(cohort, noact, cohort.beta)
        assert sol.values == pytest.approx(v_passive, abs=1e-4)

    def test_vi_dominates_tw_exactly(self):
        # discounted value of the VI policy weakly dominates TW in every state
        rng = np.random.default_rng(11)
        for _ in range(3):
            cohort = sample_cohort(rng, 3, psi_milli=500, budget_milli=1500)
            g = DiGraph(3, [(0, 1), (1, 2)])
            table = build_table(cohort)
            vi_pol = VIPolicy(cohort, g)
            tw_pol = TWPolicy(cohort, g, table=table)
            v_vi = exact_policy_value(cohort, vi_pol, cohort.beta)
            v_tw = exact_policy_value(cohort, tw_pol, cohort.beta)
            assert np.all(v_vi >= v_tw - 1e-6)
            # vi_solve's fixed point matches the induced policy's exact value
            assert vi_pol.solution.values == pytest.approx(v_vi, abs=1e-3)

    def test_bitmask_and_value_at(self):
        cohort = sample_cohort(np.random.default_rng(12), 3, budget_milli=1000)
        mdp = build_system_mdp(cohort, DiGraph(3))
        sol = vi_solve(mdp)
        s = np.array([1, 0, 1], dtype=np.int8)
        assert _bitmask(s) == 5
        assert sol.value_at(s) == sol.values[5]

    def test_memory_guard(self):
        cohort = sample_cohort(
            np.random.default_rng(13), 10, psi_milli=0, budget_milli=10_000
        )
        g = sbm_generate([10], 1.0, 1.0, np.random.default_rng(0))
        with pytest.raises(ResourceError):
            build_system_mdp(cohort, g)


class TestMakePolicy:
    def test_unknown_name_rejected(self):
        cohort = sample_cohort(np.random.default_rng(14), 2)
        with pytest.raises(ValueError):
            make_policy("oracle", cohort, DiGraph(2))
