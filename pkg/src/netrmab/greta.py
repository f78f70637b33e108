"""Graph-aware greedy allocation: per-timestep construction of a budget- and
neighborhood-feasible action vector by edge-index selection.

The per-timestep budget is consumed in chunks of min(B', 2). For each chunk
two candidates are compared by cumulative subsidy: the top pulls by Whittle
index, and a greedy pull+message set built from edge index values on the
augmented graph. The dummy vertex -1 encodes the pull-without-message option
and its action is pinned to no-act throughout.

This module is the readable pure-python implementation; :func:`greta_step`
dispatches to the compiled kernel when one is available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import MESSAGE, NOACT, PULL, PULL_COST_MILLI, CostModel
from .graph import DUMMY, AugmentedGraph, DiGraph, construct_augmented

Edge = tuple[int, int]


@dataclass
class ChunkResult:
    """Candidate (partial) upgrades, their cumulative subsidy, and the edges
    consumed while building them."""

    upgrades: dict[int, int]
    nu: float
    consumed: set[Edge] = field(default_factory=set)


@dataclass
class ChunkTrace:
    """Instrumentation record for one committed budget chunk."""

    chunk_index: int
    nu_pull_only: float
    nu_msg_pull: float
    branch: str  # "pull_only" | "msg_pull"
    upgrades: dict[int, int]


def get_cost(u: int, v: int, actions: np.ndarray, cost_model: CostModel) -> int:
    """Milli-unit cost of (pull u, message v) given current actions.

    Already-acted vertices are charged upgrade offsets only; messaging the
    dummy vertex is free.
    """
    psi = cost_model.psi_milli
    a_u = actions[u]
    c_u = PULL_COST_MILLI * (a_u == NOACT) + (PULL_COST_MILLI - psi) * (a_u == MESSAGE)
    c_v = 0 if (v == DUMMY or actions[v] == MESSAGE) else psi
    return int(c_u + c_v)


def _vk(v: int, n: int) -> int:
    """Sort key for a target vertex; the dummy orders after all real ones."""
    return n if v == DUMMY else v


def _min_live_cost(graph: AugmentedGraph, actions: np.ndarray, cost_model: CostModel):
    best = None
    for u in range(graph.n):
        for v in graph.live_out(u):
            c = get_cost(u, v, actions, cost_model)
            if best is None or c < best:
                best = c
                if best == 0:
                    return 0
    return best


def pull_only(graph: AugmentedGraph, b_units: int, w2: np.ndarray) -> ChunkResult:
    """Top pulls by index among vertices whose placeholder edge is still live."""
    candidates = [u for u in range(graph.n) if graph.has_live_edge(u, DUMMY)]
    candidates.sort(key=lambda u: (-w2[u], u))
    top = candidates[: max(0, min(b_units, len(candidates)))]
    return ChunkResult(upgrades={u: PULL for u in top}, nu=float(sum(w2[u] for u in top)))


def edge_indices(
    u: int,
    nout: list[int],
    b_milli: int,
    psi_milli: int,
    w2: np.ndarray,
    w1: np.ndarray,
) -> dict[Edge, float]:
    """Edge index values for u's live edges toward currently unacted targets.

    The edge to the highest-valued message target absorbs the cumulative
    value of the cost-feasible out-neighborhood (top n_msgs message indices);
    every other edge carries the plain pair value W2[u] + W1[v].
    """
    if not nout:
        return {}
    n = len(w2) - 1
    if psi_milli == 0:
        n_msgs = len(nout)
    else:
        n_msgs = min(b_milli // psi_milli, len(nout))
    ordered = sorted(nout, key=lambda v: (-w1[v], _vk(v, n)))
    msg_values = [float(w1[v]) for v in ordered]
    f: dict[Edge, float] = {}
    for v in nout:
        if v == ordered[0]:
            f[(u, v)] = float(w2[u]) + sum(msg_values[:n_msgs])
        else:
            f[(u, v)] = float(w2[u]) + float(w1[v])
    return f


def mod_acts(
    graph: AugmentedGraph,
    cost_model: CostModel,
    upgrades: dict[int, int],
    actions: np.ndarray,
    budget_milli: int,
) -> int:
    """Apply action upgrades, charging offsets against each vertex's previous
    action; returns the remaining budget. Mutates ``actions`` in place.

    With psi = 0, a pull also messages every currently unacted out-neighbor
    of the pulled vertex. The dummy vertex is never upgraded. Callers must
    pre-check affordability; a negative resulting budget is a contract
    violation.
    """
    psi = cost_model.psi_milli
    for u in sorted(upgrades):
        new = upgrades[u]
        if u == DUMMY:
            continue
        prev = int(actions[u])
        if new == MESSAGE:
            if prev != MESSAGE:
                budget_milli -= psi
            actions[u] = max(prev, MESSAGE)
        elif new == PULL:
            if prev == NOACT:
                budget_milli -= PULL_COST_MILLI
            elif prev == MESSAGE:
                budget_milli -= PULL_COST_MILLI - psi
            actions[u] = PULL
            if psi == 0:
                for v in sorted(graph.live_out(u)):
                    if v != DUMMY and actions[v] == NOACT:
                        actions[v] = MESSAGE
        else:
            raise ValueError(f"upgrades must map to {{1,2}}, got {new}")
    if budget_milli < 0:
        raise RuntimeError("budget underflow: caller failed to pre-check affordability")
    return budget_milli


def update_graph(graph: AugmentedGraph, chosen: dict[int, int], consumed: set[Edge]) -> None:
    """Prune the live edge set after committing actions: every pulled vertex
    loses its in-edges and its placeholder edge; consumed edges are dropped."""
    for u in sorted(chosen):
        if u != DUMMY and chosen[u] == PULL:
            graph.remove_in_edges(u)
            graph.remove_edge(u, DUMMY)
    for u, v in consumed:
        graph.remove_edge(u, v)


def msg_pull(
    graph: AugmentedGraph,
    b_milli: int,
    cost_model: CostModel,
    actions: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
) -> ChunkResult:
    """Greedy pull+message selection over edge index values for one chunk.

    Operates on local copies; returns the candidate upgrades relative to
    ``actions``, the cumulative subsidy, and the consumed edge set.
    """
    local = graph.copy()
    cand = actions.copy()
    n = graph.n
    consumed: set[Edge] = set()
    nu = 0.0
    b = int(b_milli)
    while local.num_live_edges > 0:
        cheapest = _min_live_cost(local, cand, cost_model)
        if cheapest is None or cheapest > b:
            break
        f: dict[Edge, float] = {}
        for u in range(n):
            nout = [v for v in local.live_out(u) if v == DUMMY or cand[v] == NOACT]
            f.update(edge_indices(u, nout, b, cost_model.psi_milli, w2, w1))
        if not f:
            break
        order = sorted(f, key=lambda e: (-f[e], e[0], _vk(e[1], n)))
        selected = False
        for u, v in order:
            if get_cost(u, v, cand, cost_model) <= b:
                upgrades = {u: PULL}
                if v != DUMMY:
                    upgrades[v] = MESSAGE
                b = mod_acts(local, cost_model, upgrades, cand, b)
                update_graph(local, {u: PULL}, set())
                nu += f[(u, v)]
                consumed.add((u, v))
                selected = True
                break
        if not selected:
            break
    upgrades = {
        i: int(cand[i]) for i in range(n) if cand[i] > actions[i]
    }
    return ChunkResult(upgrades=upgrades, nu=nu, consumed=consumed)


def greta_step_pure(
    graph: DiGraph,
    budget_milli: int,
    cost_model: CostModel,
    w1: np.ndarray,
    w2: np.ndarray,
    trace: list[ChunkTrace] | None = None,
) -> np.ndarray:
    """One timestep of the heuristic on a fresh augmented graph (pure python)."""
    aug = construct_augmented(graph)
    n = aug.n
    actions = np.zeros(n + 1, dtype=np.int8)  # index -1 = dummy, pinned 0
    remaining = int(budget_milli)
    chunk = 0
    while aug.num_live_edges > 0:
        cheapest = _min_live_cost(aug, actions, cost_model)
        if cheapest is None or cheapest > remaining:
            break
        b = min(remaining, 2 * PULL_COST_MILLI)
        po = pull_only(aug, b // PULL_COST_MILLI, w2)
        mp = msg_pull(aug, b, cost_model, actions, w1, w2)
        if po.nu >= mp.nu:
            chosen, consumed, branch = po, set(), "pull_only"
        else:
            chosen, consumed, branch = mp, mp.consumed, "msg_pull"
        if not chosen.upgrades:
            break
        if trace is not None:
            trace.append(
                ChunkTrace(
                    chunk_index=chunk,
                    nu_pull_only=po.nu,
                    nu_msg_pull=mp.nu,
                    branch=branch,
                    upgrades=dict(chosen.upgrades),
                )
            )
        remaining = mod_acts(aug, cost_model, chosen.upgrades, actions, remaining)
        update_graph(aug, chosen.upgrades, consumed)
        chunk += 1
    return actions[:n].copy()


@dataclass(frozen=True)
class FlatGraph:
    """CSR layout of the augmented graph for the compiled kernel.

    Augmented edges are ordered per source vertex: real targets ascending,
    then the placeholder edge (target index n stands in for the dummy).
    """

    n: int
    out_indptr: np.ndarray  # (n+1,)
    edge_v: np.ndarray      # (m + n,), dummy encoded as n
    in_indptr: np.ndarray   # (n+1,) edge indices grouped by real target
    in_eidx: np.ndarray
    edge_u: np.ndarray


def flatten_graph(graph: DiGraph) -> FlatGraph:
    n = graph.n_vertices
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    edge_v = []
    edge_u = []
    for u in range(n):
        targets = graph.out_neighbors(u) + [n]
        edge_v.extend(targets)
        edge_u.extend([u] * len(targets))
        out_indptr[u + 1] = len(edge_v)
    edge_v = np.asarray(edge_v, dtype=np.int64)
    edge_u = np.asarray(edge_u, dtype=np.int64)
    by_target = [[] for _ in range(n)]
    for eid, v in enumerate(edge_v.tolist()):
        if v < n:
            by_target[v].append(eid)
    in_indptr = np.zeros(n + 1, dtype=np.int64)
    in_eidx = []
    for v in range(n):
        in_eidx.extend(by_target[v])
        in_indptr[v + 1] = len(in_eidx)
    return FlatGraph(
        n=n,
        out_indptr=out_indptr,
        edge_v=edge_v,
        in_indptr=in_indptr,
        in_eidx=np.asarray(in_eidx, dtype=np.int64),
        edge_u=edge_u,
    )


def greta_step(
    graph: DiGraph,
    budget_milli: int,
    cost_model: CostModel,
    w1: np.ndarray,
    w2: np.ndarray,
    backend: str = "auto",
    trace: list[ChunkTrace] | None = None,
    flat: FlatGraph | None = None,
) -> np.ndarray:
    """One timestep of the heuristic; compiled kernel when available.

    ``w1``/``w2`` are the per-vertex index values resolved at the current
    states, length n+1 with the trailing dummy entry equal to 0. Passing a
    ``trace`` list forces the pure path (the kernel does not instrument).
    """
    if budget_milli < 0:
        raise ValueError("budget must be >= 0")
    use_compiled = (
        backend != "pure"
        and trace is None
        and _backend.HAVE_COMPILED
    )
    if backend == "compiled" and not _backend.HAVE_COMPILED:
        raise RuntimeError("compiled kernels are not available")
    if not use_compiled:
        return greta_step_pure(graph, budget_milli, cost_model, w1, w2, trace=trace)
    if flat is None:
        flat = flatten_graph(graph)
    return _backend.greta_step_flat(
        flat.n,
        flat.out_indptr,
        flat.edge_v,
        flat.in_indptr,
        flat.in_eidx,
        flat.edge_u,
        np.ascontiguousarray(w1, dtype=np.float64),
        np.ascontiguousarray(w2, dtype=np.float64),
        int(budget_milli),
        int(cost_model.psi_milli),
    )
