"""Seeded episode simulation, batch evaluation across seeds, and metrics.

RNG discipline: each episode owns two counter-based streams keyed by the
episode seed. The environment stream draws the initial states and a (T, n)
uniform matrix *before* any policy interaction, so arm transitions are
independent of policy decisions and common random numbers pair policies for
ordering comparisons. The policy stream serves randomized policies only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MESSAGE, PULL, PULL_COST_MILLI, Cohort
from .graph import DiGraph
from .policies import Policy

INIT_MODES = ("uniform", "all0", "all1")


class FeasibilityError(RuntimeError):
    """A policy emitted an infeasible assignment; this is a test oracle, not a
    recoverable condition."""


def check_feasibility(
    actions: np.ndarray, graph: DiGraph, cohort: Cohort
) -> int:
    """Assert totality, budget and message coverage; return the spend in
    milli-units."""
    n = cohort.n
    actions = np.asarray(actions)
    if actions.shape != (n,):
        raise FeasibilityError(f"assignment shape {actions.shape} != ({n},)")
    if not np.all(np.isin(actions, (0, 1, 2))):
        raise FeasibilityError(f"assignment contains non-actions: {actions}")
    psi = cohort.cost_model.psi_milli
    spend = int(
        PULL_COST_MILLI * int(np.sum(actions == PULL)) + psi * int(np.sum(actions == MESSAGE))
    )
    if spend > cohort.budget_milli:
        raise FeasibilityError(
            f"spend {spend} exceeds budget {cohort.budget_milli} milli-units"
        )
    for i in np.flatnonzero(actions == MESSAGE):
        if not any(actions[j] == PULL for j in graph.in_neighbors(int(i))):
            raise FeasibilityError(
                f"vertex {i} messaged without a pulled in-neighbor"
            )
    return spend


@dataclass(frozen=True)
class EpisodeResult:
    """Post-transition states s_1..s_T (T x n), the actions taken at each
    step, and the undiscounted reward R = states.sum()."""

    states: np.ndarray
    actions: np.ndarray
    reward: int
    seed: int
    initial_states: np.ndarray
    max_spend_milli: int


def transition(arm, s: int, a: int, rng: np.random.Generator) -> int:
    """One Bernoulli draw: next state is 1 with probability P^a_{s,1}."""
    return int(rng.random() < arm.p_up(s, a))


def _env_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), 0]))


def _policy_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), 1]))


def initial_states(cohort: Cohort, rng: np.random.Generator, init: str = "uniform") -> np.ndarray:
    if init == "uniform":
        return rng.integers(0, 2, size=cohort.n).astype(np.int8)
    if init == "all0":
        return np.zeros(cohort.n, dtype=np.int8)
    if init == "all1":
        return np.ones(cohort.n, dtype=np.int8)
    raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")


def run_episode(
    cohort: Cohort,
    graph: DiGraph,
    policy: Policy,
    seed: int,
    init: str = "uniform",
) -> EpisodeResult:
    n = cohort.n
    t_horizon = cohort.horizon
    rng_env = _env_rng(seed)
    s = initial_states(cohort, rng_env, init)
    u = rng_env.random((t_horizon, n))  # pregenerated, policy-independent
    rng_pol = _policy_rng(seed)
    p_up = cohort.tensor()[:, :, :, 1]  # (n, 3, 2) indexed [arm, action, state]
    ar = np.arange(n)
    states = np.empty((t_horizon, n), dtype=np.int8)
    actions = np.empty((t_horizon, n), dtype=np.int8)
    s0 = s.copy()
    max_spend = 0
    for t in range(t_horizon):
        a = np.asarray(policy.step(s.copy(), rng_pol), dtype=np.int8)
        spend = check_feasibility(a, graph, cohort)
        max_spend = max(max_spend, spend)
        s = (u[t] < p_up[ar, a, s]).astype(np.int8)
        states[t] = s
        actions[t] = a
    return EpisodeResult(
        states=states,
        actions=actions,
        reward=int(states.sum()),
        seed=seed,
        initial_states=s0,
        max_spend_milli=max_spend,
    )


@dataclass(frozen=True)
class BatchResult:
    """Per-seed rewards with mean and 95% CI half-width (1.96 sd / sqrt(k))."""

    policy: str
    rewards: np.ndarray
    seeds: tuple[int, ...]
    mean: float
    ci95: float
    max_spend_milli: int
    config_hash: str = ""

    @property
    def n_seeds(self) -> int:
        return len(self.seeds)


def summarize(policy_name: str, rewards: np.ndarray, seeds, max_spend: int, config_hash: str = "") -> BatchResult:
    rewards = np.asarray(rewards, dtype=np.float64)
    k = len(rewards)
    mean = float(rewards.mean())
    sd = float(rewards.std(ddof=1)) if k > 1 else 0.0
    return BatchResult(
        policy=policy_name,
        rewards=rewards,
        seeds=tuple(int(s) for s in seeds),
        mean=mean,
        ci95=1.96 * sd / np.sqrt(k),
        max_spend_milli=max_spend,
        config_hash=config_hash,
    )


def run_batch(
    cohort: Cohort,
    graph: DiGraph,
    policy: Policy,
    seeds,
    init: str = "uniform",
    config_hash: str = "",
) -> BatchResult:
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need >= 2 seeds for a confidence interval")
    rewards = np.empty(len(seeds))
    max_spend = 0
    for i, seed in enumerate(seeds):
        ep = run_episode(cohort, graph, policy, seed, init=init)
        rewards[i] = ep.reward
        max_spend = max(max_spend, ep.max_spend_milli)
    return summarize(policy.name, rewards, seeds, max_spend, config_hash=config_hash)


def intervention_benefit(e_pi: float, e_noact: float, e_gh: float) -> float:
    """100 (E_pi - E_noact) / (E_gh - E_noact); nan when the denominator is 0."""
    denom = e_gh - e_noact
    if denom == 0.0:
        return float("nan")
    return 100.0 * (e_pi - e_noact) / denom
