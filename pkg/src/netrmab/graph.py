"""Directed graphs, stochastic block model generation, arm-to-vertex mappings,
and the augmented graph (real vertices + the dummy vertex -1) consumed by the
allocation heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Cohort

DUMMY = -1


class DiGraph:
    """Simple directed graph over vertices 0..n-1 with in/out adjacency sets."""

    def __init__(self, n_vertices: int, edges=()):
        if n_vertices < 0:
            raise ValueError("n_vertices must be >= 0")
        self.n_vertices = n_vertices
        self._out = [set() for _ in range(n_vertices)]
        self._in = [set() for _ in range(n_vertices)]
        self._m = 0
        for u, v in edges:
            self.add_edge(u, v)

    def _check(self, u: int) -> None:
        if not 0 <= u < self.n_vertices:
            raise ValueError(f"vertex {u} out of range [0, {self.n_vertices})")

    def add_edge(self, u: int, v: int) -> None:
        self._check(u)
        self._check(v)
        if u == v:
            raise ValueError(f"self-loop ({u},{v}) not allowed")
        if v not in self._out[u]:
            self._out[u].add(v)
            self._in[v].add(u)
            self._m += 1

    def has_edge(self, u: int, v: int) -> bool:
        return 0 <= u < self.n_vertices and v in self._out[u]

    def out_neighbors(self, u: int) -> list[int]:
        return sorted(self._out[u])

    def in_neighbors(self, v: int) -> list[int]:
        return sorted(self._in[v])

    def out_degree(self, u: int) -> int:
        return len(self._out[u])

    @property
    def num_edges(self) -> int:
        return self._m

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in range(self.n_vertices) for v in self._out[u])

    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) int64 array in sorted order."""
        e = self.edges()
        if not e:
            return np.empty((0, 2), dtype=np.int64)
        return np.asarray(e, dtype=np.int64)

    def to_edgelist_text(self) -> str:
        lines = [f"n={self.n_vertices}"]
        lines += [f"{u} {v}" for u, v in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist_text(cls, text: str) -> "DiGraph":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("n="):
            raise ValueError("edge-list text must start with an 'n=<|V|>' header")
        g = cls(int(lines[0][2:]))
        for ln in lines[1:]:
            u, v = ln.split()
            g.add_edge(int(u), int(v))
        return g


class AugmentedGraph:
    """Live-edge view over a base graph plus the dummy vertex -1.

    Initially E' = E union {(u,-1) for all real u}. The policy engine that
    owns an instance mutates it destructively within one timestep; build a
    fresh one per step via :func:`construct_augmented`.
    """

    def __init__(self, base: DiGraph):
        self.n = base.n_vertices
        self._out = [set(base._out[u]) | {DUMMY} for u in range(self.n)]
        self._in = [set(base._in[v]) for v in range(self.n)]
        self._m = base.num_edges + self.n

    @property
    def num_live_edges(self) -> int:
        return self._m

    def live_out(self, u: int) -> set[int]:
        return self._out[u]

    def has_live_edge(self, u: int, v: int) -> bool:
        return v in self._out[u]

    def live_edges(self) -> list[tuple[int, int]]:
        return sorted(
            ((u, v) for u in range(self.n) for v in self._out[u]),
            key=lambda e: (e[0], self.n if e[1] == DUMMY else e[1]),
        )

    def remove_edge(self, u: int, v: int) -> None:
        """Remove a live edge; removing an absent edge is a no-op."""
        if v in self._out[u]:
            self._out[u].discard(v)
            if v != DUMMY:
                self._in[v].discard(u)
            self._m -= 1

    def remove_in_edges(self, u: int) -> None:
        """Drop every live edge terminating in the real vertex u."""
        for src in list(self._in[u]):
            self._out[src].discard(u)
            self._m -= 1
        self._in[u].clear()

    def copy(self) -> "AugmentedGraph":
        dup = object.__new__(AugmentedGraph)
        dup.n = self.n
        dup._out = [set(s) for s in self._out]
        dup._in = [set(s) for s in self._in]
        dup._m = self._m
        return dup


def construct_augmented(g: DiGraph) -> AugmentedGraph:
    """Build G' = (V + {-1}, E + placeholder edges). Re-augmenting is rejected."""
    if isinstance(g, AugmentedGraph):
        raise TypeError("graph is already augmented (dummy vertex present)")
    return AugmentedGraph(g)


def sbm_generate(block_sizes, p_in: float, p_out: float, rng: np.random.Generator) -> DiGraph:
    """Stochastic block model over ordered vertex pairs.

    A directed edge (u, v), u != v, exists independently with probability
    p_in when u and v share a block, else p_out.
    """
    block_sizes = list(block_sizes)
    if not block_sizes or any(b <= 0 for b in block_sizes):
        raise ValueError("block_sizes must be a non-empty list of positive ints")
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must lie in [0,1]")
    n = sum(block_sizes)
    membership = np.repeat(np.arange(len(block_sizes)), block_sizes)
    prob = np.where(membership[:, None] == membership[None, :], p_in, p_out)
    np.fill_diagonal(prob, 0.0)
    draws = rng.random((n, n))
    us, vs = np.nonzero(draws < prob)
    g = DiGraph(n)
    for u, v in zip(us.tolist(), vs.tolist()):
        g.add_edge(u, v)
    return g


def uniform_block_sizes(n: int) -> list[int]:
    """ceil(n/10) blocks whose sizes differ by at most one."""
    k = -(-n // 10)
    base, extra = divmod(n, k)
    return [base + 1] * extra + [base] * (k - extra)


@dataclass(frozen=True)
class ArmVertexMapping:
    """Bijection between arm ids and vertex ids, plus per-vertex block labels."""

    arm_to_vertex: np.ndarray
    blocks: np.ndarray

    def __post_init__(self):
        n = len(self.arm_to_vertex)
        if sorted(self.arm_to_vertex.tolist()) != list(range(n)):
            raise ValueError("arm_to_vertex must be a bijection over [n]")

    @property
    def n(self) -> int:
        return len(self.arm_to_vertex)

    def vertex_of(self, arm_id: int) -> int:
        if arm_id == DUMMY:
            return DUMMY
        return int(self.arm_to_vertex[arm_id])

    def arm_of(self, vertex: int) -> int:
        if vertex == DUMMY:
            return DUMMY
        return int(self.vertex_to_arm[vertex])

    @property
    def vertex_to_arm(self) -> np.ndarray:
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.arm_to_vertex] = np.arange(self.n)
        return inv

    def block_sizes(self) -> list[int]:
        return np.bincount(self.blocks).tolist()

    def permute_cohort(self, cohort: Cohort) -> Cohort:
        """Cohort reindexed so that position v holds the arm mapped to vertex v."""
        from dataclasses import replace

        order = self.vertex_to_arm
        arms = tuple(
            replace(cohort.arms[int(a)], id=v) for v, a in enumerate(order)
        )
        return Cohort(
            arms=arms,
            cost_model=cohort.cost_model,
            beta=cohort.beta,
            budget_milli=cohort.budget_milli,
            horizon=cohort.horizon,
        )


def map_random(n: int, rng: np.random.Generator) -> ArmVertexMapping:
    """Uniform random bijection into ceil(n/10) near-equal blocks."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sizes = uniform_block_sizes(n)
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    return ArmVertexMapping(arm_to_vertex=rng.permutation(n), blocks=blocks)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def lloyd_kmeans(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    """Lloyd's algorithm with k-means++ seeding.

    An empty cluster is re-seeded on the point farthest from its assigned
    center. Returns (labels, centers).
    """
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n={n}], got {k}")
    centers = _kmeans_pp_init(points, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for it in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        dist_to_own = d2[np.arange(n), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(dist_to_own))
                centers[j] = points[far]
                new_labels[far] = j
                dist_to_own[far] = 0.0
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
    return labels, centers


def map_by_cluster(cohort: Cohort, k: int, rng: np.random.Generator) -> ArmVertexMapping:
    """Cluster arms in flattened transition-tensor space; each cluster's arms
    occupy one contiguous block of vertices (ascending arm id within block)."""
    n = cohort.n
    points = cohort.tensor().reshape(n, -1)
    labels, _ = lloyd_kmeans(points, k, rng)
    arm_to_vertex = np.empty(n, dtype=np.int64)
    blocks = np.empty(n, dtype=np.int64)
    v = 0
    for j in range(k):
        members = np.flatnonzero(labels == j)
        for arm in members:
            arm_to_vertex[arm] = v
            blocks[v] = j
            v += 1
    return ArmVertexMapping(arm_to_vertex=arm_to_vertex, blocks=blocks)


def within_cluster_ss(points: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for j in np.unique(labels):
        pts = points[labels == j]
        total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total
