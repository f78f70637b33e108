"""Comparison policies: NoAct, Random, centrality-weighted Random, Myopic,
Threshold Whittle, the graph-aware heuristic, and exact value iteration over
the system-level MDP.

Every policy exposes ``step(states, rng) -> actions`` where ``actions`` is an
int8 vector over the n real vertices. Policies are constructed once per
(cohort, graph) pair and are safe to reuse across episodes; ``step`` mutates
no policy state besides the caller-owned rng.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import MESSAGE, NOACT, PULL, PULL_COST_MILLI, Cohort, CostModel
from .graph import DiGraph
from .greta import FlatGraph, flatten_graph, greta_step
from .whittle import WhittleTable, build_table

POLICY_NAMES = ("noact", "random", "cwrandom", "myopic", "tw", "greta", "vi")


class ResourceError(RuntimeError):
    """State-action table would exceed the in-memory guard."""


class Policy:
    name = "base"

    def step(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class NoActPolicy(Policy):
    name = "noact"

    def __init__(self, n: int):
        self.n = n

    def step(self, states, rng):
        return np.zeros(self.n, dtype=np.int8)


class _EdgeState:
    """Per-timestep mutable live-edge view over the flattened augmented graph,
    with vectorized pair costs and the standard pruning rule (pulling u kills
    u's in-edges and placeholder; the selected edge is consumed)."""

    def __init__(self, flat: FlatGraph, budget_milli: int):
        self.flat = flat
        self.alive = np.ones(len(flat.edge_v), dtype=bool)
        self.actions = np.zeros(flat.n + 1, dtype=np.int8)  # slot n = dummy
        self.remaining = int(budget_milli)

    def pair_costs(self, psi: int) -> np.ndarray:
        f = self.flat
        au = self.actions[f.edge_u]
        cu = np.where(
            au == NOACT,
            PULL_COST_MILLI,
            np.where(au == MESSAGE, PULL_COST_MILLI - psi, 0),
        )
        cv = np.where((f.edge_v == f.n) | (self.actions[f.edge_v] == MESSAGE), 0, psi)
        return cu + cv

    def affordable(self, psi: int) -> np.ndarray:
        return np.flatnonzero(self.alive & (self.pair_costs(psi) <= self.remaining))

    def apply_pair(self, eid: int, psi: int) -> None:
        f = self.flat
        u = int(f.edge_u[eid])
        v = int(f.edge_v[eid])
        a = self.actions
        if a[u] == NOACT:
            self.remaining -= PULL_COST_MILLI
        elif a[u] == MESSAGE:
            self.remaining -= PULL_COST_MILLI - psi
        a[u] = PULL
        if v != f.n and a[v] == NOACT:
            self.remaining -= psi
            a[v] = MESSAGE
        self.alive[f.in_eidx[f.in_indptr[u]: f.in_indptr[u + 1]]] = False
        self.alive[f.out_indptr[u + 1] - 1] = False
        self.alive[eid] = False
        if self.remaining < 0:
            raise RuntimeError("budget underflow: pair selected without affordability check")


class RandomPolicy(Policy):
    """Repeatedly applies a uniformly random affordable (pull u, message v)
    pair until none remains affordable."""

    name = "random"

    def __init__(self, cohort: Cohort, graph: DiGraph):
        self.flat = flatten_graph(graph)
        self.psi = cohort.cost_model.psi_milli
        self.budget = cohort.budget_milli
        self.weights = None  # uniform

    def step(self, states, rng):
        st = _EdgeState(self.flat, self.budget)
        while True:
            idx = st.affordable(self.psi)
            if idx.size == 0:
                break
            if self.weights is None:
                eid = int(idx[rng.integers(idx.size)])
            else:
                w = self.weights[idx]
                eid = int(rng.choice(idx, p=w / w.sum()))
            st.apply_pair(eid, self.psi)
        return st.actions[: self.flat.n].copy()


class CWRandomPolicy(RandomPolicy):
    """Random pair selection weighted by 1 + out-degree of the source vertex
    in the base graph (the +1 keeps degree-0 sources selectable)."""

    name = "cwrandom"

    def __init__(self, cohort: Cohort, graph: DiGraph):
        super().__init__(cohort, graph)
        outdeg = np.array([graph.out_degree(u) for u in range(graph.n_vertices)])
        self.weights = (1.0 + outdeg)[self.flat.edge_u]


class MyopicPolicy(Policy):
    """Greedy selection of the pair with the highest expected next-step reward
    gain; the default score is the marginal gain over the pair's current
    actions, ``raw_scores=True`` uses the absolute expected reward instead."""

    name = "myopic"

    def __init__(self, cohort: Cohort, graph: DiGraph, raw_scores: bool = False):
        self.flat = flatten_graph(graph)
        self.psi = cohort.cost_model.psi_milli
        self.budget = cohort.budget_milli
        self.tensor = cohort.tensor()  # (n, 3, 2, 2)
        self.raw_scores = raw_scores

    def step(self, states, rng):
        f = self.flat
        n = f.n
        st = _EdgeState(f, self.budget)
        ar = np.arange(n)
        # per-vertex next-step reward terms at the current states, with a
        # trailing 0 so the dummy slot contributes nothing
        p_pull = np.append(self.tensor[ar, 2, states, 1], 0.0)
        p_msg = np.append(self.tensor[ar, 1, states, 1], 0.0)
        p_pas = np.append(self.tensor[ar, 0, states, 1], 0.0)
        while True:
            idx = st.affordable(self.psi)
            if idx.size == 0:
                break
            eu = f.edge_u[idx]
            ev = f.edge_v[idx]
            if self.raw_scores:
                score = p_pull[eu] + np.where(ev == n, 0.0, p_msg[ev])
            else:
                gain_u = (p_pull[eu] - p_pas[eu]) * (st.actions[eu] != PULL)
                gain_v = (p_msg[ev] - p_pas[ev]) * ((ev != n) & (st.actions[ev] == NOACT))
                score = gain_u + gain_v
            best = np.lexsort((ev, eu, -score))[0]
            st.apply_pair(int(idx[best]), self.psi)
        return st.actions[:n].copy()


def tw_step(states: np.ndarray, w2: np.ndarray, budget_milli: int) -> np.ndarray:
    """Pull the floor(B) arms with the highest pull index at their current
    states; deterministic ties by arm id."""
    n = len(states)
    k = min(budget_milli // PULL_COST_MILLI, n)
    actions = np.zeros(n, dtype=np.int8)
    if k > 0:
        order = np.lexsort((np.arange(n), -np.asarray(w2[:n])))
        actions[order[:k]] = PULL
    return actions


class TWPolicy(Policy):
    name = "tw"

    def __init__(self, cohort: Cohort, graph: DiGraph, table: WhittleTable | None = None):
        self.table = table if table is not None else build_table(cohort)
        self.budget = cohort.budget_milli

    def step(self, states, rng):
        w2 = self.table.resolve(states, PULL)
        return tw_step(states, w2, self.budget)


class GretaPolicy(Policy):
    name = "greta"

    def __init__(
        self,
        cohort: Cohort,
        graph: DiGraph,
        table: WhittleTable | None = None,
        backend: str = "auto",
    ):
        self.table = table if table is not None else build_table(cohort)
        self.graph = graph
        self.flat = flatten_graph(graph)
        self.cost_model = cohort.cost_model
        self.budget = cohort.budget_milli
        self.backend = backend

    def step(self, states, rng):
        w1 = self.table.resolve(states, MESSAGE)
        w2 = self.table.resolve(states, PULL)
        return greta_step(
            self.graph,
            self.budget,
            self.cost_model,
            w1,
            w2,
            backend=self.backend,
            flat=self.flat,
        )


# ---------------------------------------------------------------------------
# Exact solution of the system-level MDP
# ---------------------------------------------------------------------------

MAX_ENUM_N = 10
MAX_TABLE_ENTRIES = 50_000_000


@dataclass(frozen=True)
class FeasibleJointAction:
    """A joint action over all arms satisfying budget and message coverage."""

    vector: np.ndarray  # (n,) int8
    cost_milli: int


def enumerate_feasible(
    graph: DiGraph, budget_milli: int, cost_model: CostModel
) -> list[FeasibleJointAction]:
    """All joint actions in {0,1,2}^n with total cost <= B where every message
    target has a pulled in-neighbor. Includes the all-zero action."""
    n = graph.n_vertices
    if n > MAX_ENUM_N:
        raise ResourceError(f"joint-action enumeration limited to n <= {MAX_ENUM_N}, got {n}")
    psi = cost_model.psi_milli
    in_nb = [graph.in_neighbors(v) for v in range(n)]
    out: list[FeasibleJointAction] = []
    for a in itertools.product((NOACT, MESSAGE, PULL), repeat=n):
        cost = PULL_COST_MILLI * a.count(PULL) + psi * a.count(MESSAGE)
        if cost > budget_milli:
            continue
        if any(
            a[i] == MESSAGE and not any(a[j] == PULL for j in in_nb[i]) for i in range(n)
        ):
            continue
        out.append(FeasibleJointAction(vector=np.array(a, dtype=np.int8), cost_milli=int(cost)))
    return out


@dataclass(frozen=True)
class SystemMdp:
    """Joint MDP over all arms: bitmask states {0,1}^n, feasibility-filtered
    joint actions, product transition kernel, reward R(s) = sum_i s_i."""

    cohort: Cohort
    actions: tuple[FeasibleJointAction, ...]
    beta: float

    @property
    def n(self) -> int:
        return self.cohort.n

    @property
    def n_states(self) -> int:
        return 1 << self.cohort.n


def build_system_mdp(cohort: Cohort, graph: DiGraph) -> SystemMdp:
    acts = enumerate_feasible(graph, cohort.budget_milli, cohort.cost_model)
    if (1 << cohort.n) * len(acts) > MAX_TABLE_ENTRIES:
        raise ResourceError(
            f"state-action table {1 << cohort.n} x {len(acts)} exceeds the memory guard"
        )
    return SystemMdp(cohort=cohort, actions=tuple(acts), beta=cohort.beta)


@dataclass(frozen=True)
class ViSolution:
    """Converged values over bitmask states and the greedy joint-action index
    per state (first maximizer in action enumeration order)."""

    values: np.ndarray       # (2^n,)
    policy: np.ndarray       # (2^n,) indices into mdp.actions
    iterations: int

    def value_at(self, states: np.ndarray) -> float:
        return float(self.values[_bitmask(states)])


def _bitmask(states: np.ndarray) -> int:
    """State vector -> bitmask index; arm i occupies bit i."""
    return int(np.dot(np.asarray(states, dtype=np.int64), 1 << np.arange(len(states))))


def _expected_values(mdp: SystemMdp, v: np.ndarray) -> np.ndarray:
    """E[V(s') | s, a] for every (action, state); shape (|A|, 2^n).

    Each action's expectation is a sequence of per-arm tensor contractions of
    V reshaped to (2,)*n; arm i's axis is axis i (bit i of the state index is
    arm i, so the reshape order is reversed).
    """
    n = mdp.n
    tensor = mdp.cohort.tensor()
    vt = v.reshape((2,) * n)
    out = np.empty((len(mdp.actions), v.size))
    for ai, act in enumerate(mdp.actions):
        w = vt
        for i in range(n):
            axis = n - 1 - i  # bit i of the flat index is the last axis first
            m = tensor[i, act.vector[i]]  # (s_i, s_i')
            w = np.moveaxis(np.tensordot(m, w, axes=([1], [axis])), 0, axis)
        out[ai] = w.reshape(-1)
    return out


def vi_solve(mdp: SystemMdp, tol: float = 1e-6, max_iter: int = 100_000) -> ViSolution:
    """Value iteration to sup-norm tol, then greedy policy extraction."""
    n = mdp.n
    reward = np.array([bin(s).count("1") for s in range(1 << n)], dtype=np.float64)
    v = np.zeros(1 << n)
    it = 0
    for it in range(1, max_iter + 1):
        ev = _expected_values(mdp, v)
        new_v = reward + mdp.beta * ev.max(axis=0)
        delta = float(np.max(np.abs(new_v - v)))
        v = new_v
        if delta < tol:
            break
    else:
        raise RuntimeError("system-level value iteration failed to converge")
    ev = _expected_values(mdp, v)
    policy = np.argmax(reward + mdp.beta * ev, axis=0)
    return ViSolution(values=v, policy=policy, iterations=it)


class VIPolicy(Policy):
    name = "vi"

    def __init__(
        self,
        cohort: Cohort,
        graph: DiGraph,
        tol: float = 1e-6,
        solution: ViSolution | None = None,
        mdp: SystemMdp | None = None,
    ):
        self.mdp = mdp if mdp is not None else build_system_mdp(cohort, graph)
        self.solution = solution if solution is not None else vi_solve(self.mdp, tol=tol)

    def step(self, states, rng):
        ai = int(self.solution.policy[_bitmask(states)])
        return self.mdp.actions[ai].vector.copy()


def make_policy(
    name: str,
    cohort: Cohort,
    graph: DiGraph,
    table: WhittleTable | None = None,
    **kwargs,
) -> Policy:
    if name == "noact":
        return NoActPolicy(cohort.n)
    if name == "random":
        return RandomPolicy(cohort, graph)
    if name == "cwrandom":
        return CWRandomPolicy(cohort, graph)
    if name == "myopic":
        return MyopicPolicy(cohort, graph, **kwargs)
    if name == "tw":
        return TWPolicy(cohort, graph, table=table)
    if name == "greta":
        return GretaPolicy(cohort, graph, table=table, **kwargs)
    if name == "vi":
        return VIPolicy(cohort, graph, **kwargs)
    raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}")
