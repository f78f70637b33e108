"""Experiment runners: optimal comparison at small n, the policy comparison
table at n=100, hyperparameter sensitivity sweeps, and the edge-density sweep
over subsets of the complete graph.

All runners share one CSV row schema and write byte-stable outputs: rows are
reduced in deterministic order and floats use fixed formatting. The manifest
(which carries timestamps) is the only non-reproducible file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _backend, svg
from .core import PULL_COST_MILLI, Cohort, CostModel, sample_cohort
from .graph import (
    ArmVertexMapping,
    DiGraph,
    map_by_cluster,
    map_random,
    sbm_generate,
)
from .policies import POLICY_NAMES, make_policy
from .sim import run_episode, summarize
from .whittle import WhittleTable, build_table

EXPERIMENT_KINDS = (
    "optimal_comparison",
    "policy_table",
    "sensitivity_budget",
    "sensitivity_psi",
    "sensitivity_topology",
    "edge_density",
)

MAPPING_KINDS = ("identity", "random", "by_cluster")

CSV_COLUMNS = [
    "experiment",
    "policy",
    "mapping",
    "B_milli",
    "psi_milli",
    "p_in",
    "p_out",
    "density",
    "edge_seed",
    "n",
    "T",
    "mean_R",
    "ci95",
    "ib_mean",
    "ib_ci95",
    "max_spend_milli",
    "n_seeds",
    "config_hash",
]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 100
    horizon: int = 120
    budgets_milli: tuple = (10_000,)
    psis_milli: tuple = (500,)
    p_pairs: tuple = ((0.2, 0.05),)
    mappings: tuple = ("by_cluster",)
    policies: tuple = ("noact", "myopic", "tw", "greta")
    seeds: tuple = tuple(range(50))
    edge_seeds: tuple = tuple(range(6))
    densities: tuple = tuple(round(0.1 * i, 1) for i in range(11))
    arm_seed: int = 0
    graph_seed: int = 0
    mapping_seed: int = 0
    init: str = "uniform"

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        for name, values in (
            ("budgets_milli", self.budgets_milli),
            ("psis_milli", self.psis_milli),
            ("p_pairs", self.p_pairs),
            ("mappings", self.mappings),
            ("policies", self.policies),
            ("seeds", self.seeds),
        ):
            if len(values) == 0:
                raise ValueError(f"{name} must be non-empty")
        if self.n < 1 or self.horizon < 0:
            raise ValueError("n must be >= 1 and horizon >= 0")
        for b in self.budgets_milli:
            if not isinstance(b, (int, np.integer)) or b < 0:
                raise ValueError(f"budgets_milli entries must be non-negative ints, got {b!r}")
        for p in self.psis_milli:
            if not isinstance(p, (int, np.integer)) or not 0 <= p < PULL_COST_MILLI:
                raise ValueError(f"psis_milli entries must be ints in [0,1000), got {p!r}")
        for pin, pout in self.p_pairs:
            if not (0.0 <= pin <= 1.0 and 0.0 <= pout <= 1.0):
                raise ValueError(f"edge probabilities must be in [0,1], got {(pin, pout)}")
        for mp in self.mappings:
            if mp not in MAPPING_KINDS:
                raise ValueError(f"mapping must be one of {MAPPING_KINDS}, got {mp!r}")
        for pol in self.policies:
            if pol not in POLICY_NAMES:
                raise ValueError(f"unknown policy {pol!r}")
        for d in self.densities:
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"densities must be in [0,1], got {d!r}")

    def to_json(self) -> str:
        doc = asdict(self)
        doc["p_pairs"] = [list(p) for p in self.p_pairs]
        for key in ("budgets_milli", "psis_milli", "mappings", "policies",
                    "seeds", "edge_seeds", "densities"):
            doc[key] = list(doc[key])
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        doc = json.loads(text)
        doc["p_pairs"] = tuple((float(a), float(b)) for a, b in doc["p_pairs"])
        for key in ("budgets_milli", "psis_milli", "seeds", "edge_seeds"):
            doc[key] = tuple(int(x) for x in doc[key])
        for key in ("mappings", "policies"):
            doc[key] = tuple(str(x) for x in doc[key])
        doc["densities"] = tuple(float(x) for x in doc["densities"])
        return cls(**doc)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


# -- default configurations for each experiment ------------------------------

def default_config(kind: str) -> ExperimentConfig:
    if kind == "optimal_comparison":
        return ExperimentConfig(
            kind=kind,
            n=8,
            horizon=120,
            budgets_milli=(1000, 1500, 2000, 2500, 3000),
            psis_milli=(500,),
            p_pairs=((1.0, 1.0),),  # complete graph
            mappings=("identity",),
            policies=("noact", "tw", "greta", "vi"),
            seeds=tuple(range(50)),
        )
    if kind == "policy_table":
        return ExperimentConfig(
            kind=kind,
            n=100,
            horizon=120,
            budgets_milli=(10_000,),
            psis_milli=(500,),
            p_pairs=((0.2, 0.05),),
            mappings=("random", "by_cluster"),
            policies=("noact", "random", "cwrandom", "myopic", "tw", "greta"),
            seeds=tuple(range(50)),
        )
    if kind == "sensitivity_budget":
        return ExperimentConfig(
            kind=kind,
            budgets_milli=(5000, 10_000, 15_000),
            psis_milli=(500,),
            p_pairs=((0.25, 0.05),),
            mappings=("by_cluster",),
            policies=("noact", "myopic", "tw", "greta"),
        )
    if kind == "sensitivity_psi":
        return ExperimentConfig(
            kind=kind,
            budgets_milli=(6000,),
            psis_milli=(0, 250, 500, 750, 900),
            p_pairs=((0.25, 0.05),),
            mappings=("by_cluster",),
            policies=("noact", "myopic", "tw", "greta"),
        )
    if kind == "sensitivity_topology":
        return ExperimentConfig(
            kind=kind,
            budgets_milli=(10_000,),
            psis_milli=(500,),
            # start from the edgeless graph, then grow assortativity with
            # p_out pinned at 0.1, then grow disassortativity with p_in pinned
            p_pairs=(
                (0.0, 0.0),
                (0.1, 0.1),
                (0.2, 0.1),
                (0.3, 0.1),
                (0.4, 0.1),
                (0.1, 0.2),
                (0.1, 0.3),
                (0.1, 0.4),
            ),
            mappings=("by_cluster",),
            policies=("noact", "myopic", "tw", "greta"),
        )
    if kind == "edge_density":
        return ExperimentConfig(
            kind=kind,
            n=100,
            horizon=120,
            budgets_milli=(10_000,),
            psis_milli=(500,),
            mappings=("identity",),
            policies=("tw", "greta"),
            seeds=tuple(range(30)),
            edge_seeds=tuple(range(6)),
        )
    raise ValueError(f"unknown experiment kind {kind!r}")


# -- instance assembly --------------------------------------------------------

def base_cohort(cfg: ExperimentConfig) -> Cohort:
    rng = np.random.default_rng(cfg.arm_seed)
    return sample_cohort(rng, cfg.n, horizon=cfg.horizon)


def make_mapping(cfg: ExperimentConfig, cohort: Cohort, kind: str) -> ArmVertexMapping:
    rng = np.random.default_rng(cfg.mapping_seed)
    if kind == "identity":
        n = cohort.n
        k = -(-n // 10)
        base, extra = divmod(n, k)
        sizes = [base + 1] * extra + [base] * (k - extra)
        return ArmVertexMapping(
            arm_to_vertex=np.arange(n), blocks=np.repeat(np.arange(k), sizes)
        )
    if kind == "random":
        return map_random(cohort.n, rng)
    if kind == "by_cluster":
        return map_by_cluster(cohort, -(-cohort.n // 10), rng)
    raise ValueError(f"unknown mapping kind {kind!r}")


def permuted_table(table: WhittleTable, mapping: ArmVertexMapping) -> WhittleTable:
    return WhittleTable(values=table.values[mapping.vertex_to_arm])


def make_graph(cfg: ExperimentConfig, mapping: ArmVertexMapping, p_in: float, p_out: float) -> DiGraph:
    rng = np.random.default_rng(cfg.graph_seed)
    return sbm_generate(mapping.block_sizes(), p_in, p_out, rng)


def complete_graph(n: int) -> DiGraph:
    return DiGraph(n, ((u, v) for u in range(n) for v in range(n) if u != v))


def density_subgraph(n: int, density: float, edge_seed: int) -> DiGraph:
    """Random subset of the complete digraph with round(density * n(n-1))
    edges; subsets are nested in density for a fixed edge seed."""
    all_edges = [(u, v) for u in range(n) for v in range(n) if u != v]
    k = int(round(density * len(all_edges)))
    order = np.random.default_rng(edge_seed).permutation(len(all_edges))
    return DiGraph(n, (all_edges[i] for i in order[:k]))


# -- cell evaluation ----------------------------------------------------------

@dataclass
class CellResult:
    """One (policy, hyperparameter) grid cell: per-seed rewards + summary."""

    policy: str
    mapping: str
    budget_milli: int
    psi_milli: int
    p_in: float
    p_out: float
    density: float | None
    edge_seed: int | None
    rewards: np.ndarray
    mean: float
    ci95: float
    max_spend_milli: int
    ib_mean: float | None = None
    ib_ci95: float | None = None


def run_cell(
    cfg: ExperimentConfig,
    cohort: Cohort,
    graph: DiGraph,
    policy_name: str,
    table: WhittleTable,
    **meta,
):
    pol = make_policy(policy_name, cohort, graph, table=table)
    rewards = np.empty(len(cfg.seeds))
    max_spend = 0
    for i, seed in enumerate(cfg.seeds):
        ep = run_episode(cohort, graph, pol, seed, init=cfg.init)
        rewards[i] = ep.reward
        max_spend = max(max_spend, ep.max_spend_milli)
    batch = summarize(policy_name, rewards, cfg.seeds, max_spend)
    return CellResult(
        policy=policy_name,
        rewards=rewards,
        mean=batch.mean,
        ci95=batch.ci95,
        max_spend_milli=max_spend,
        **meta,
    )


def attach_ib(cells: list[CellResult]) -> None:
    """Per-seed paired intervention benefit against the noact/greta cells of
    the same hyperparameter group; greta is 100 +- 0 by construction."""
    by_policy = {c.policy: c for c in cells}
    if "noact" not in by_policy or "greta" not in by_policy:
        return
    base = by_policy["noact"].rewards
    top = by_policy["greta"].rewards
    for c in cells:
        denom = top - base
        with np.errstate(divide="ignore", invalid="ignore"):
            ib = 100.0 * (c.rewards - base) / denom
        ib = ib[np.isfinite(ib)]
        if len(ib) == 0:
            c.ib_mean = float("nan")
            c.ib_ci95 = float("nan")
            continue
        c.ib_mean = float(ib.mean())
        sd = float(ib.std(ddof=1)) if len(ib) > 1 else 0.0
        c.ib_ci95 = 1.96 * sd / math.sqrt(len(ib))


# -- output -------------------------------------------------------------------

def _fmt(x, spec="{:.6f}"):
    if x is None:
        return ""
    if isinstance(x, float):
        return spec.format(x)
    return str(x)


def write_rows(path, cfg: ExperimentConfig, cells: list[CellResult]) -> None:
    chash = cfg.config_hash()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for c in cells:
            writer.writerow(
                [
                    cfg.kind,
                    c.policy,
                    c.mapping,
                    c.budget_milli,
                    c.psi_milli,
                    _fmt(c.p_in, "{:.3f}"),
                    _fmt(c.p_out, "{:.3f}"),
                    _fmt(c.density, "{:.1f}"),
                    _fmt(c.edge_seed),
                    cfg.n,
                    cfg.horizon,
                    _fmt(c.mean, "{:.4f}"),
                    _fmt(c.ci95, "{:.4f}"),
                    _fmt(c.ib_mean, "{:.4f}"),
                    _fmt(c.ib_ci95, "{:.4f}"),
                    c.max_spend_milli,
                    len(cfg.seeds),
                    chash,
                ]
            )


def write_manifest(out_dir, cfg: ExperimentConfig, started: float, files: list[str]) -> None:
    doc = {
        "config": json.loads(cfg.to_json()),
        "config_hash": cfg.config_hash(),
        "backend": _backend.backend_name(),
        "started_unix": started,
        "finished_unix": time.time(),
        "files": files,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


# -- runners -------------------------------------------------------------------

def _grid_run(cfg: ExperimentConfig, out_dir, with_ib: bool = False) -> list[CellResult]:
    """Shared sweep over mappings x (B, psi, p) cells for SBM-backed
    experiments."""
    cohort0 = base_cohort(cfg)
    table0 = build_table(cohort0)
    cells: list[CellResult] = []
    for mapping_kind in cfg.mappings:
        mapping = make_mapping(cfg, cohort0, mapping_kind)
        cohort_m = mapping.permute_cohort(cohort0)
        table_m = permuted_table(table0, mapping)
        for p_in, p_out in cfg.p_pairs:
            graph = make_graph(cfg, mapping, p_in, p_out)
            for budget in cfg.budgets_milli:
                for psi in cfg.psis_milli:
                    cohort_cell = replace(
                        cohort_m,
                        budget_milli=int(budget),
                        cost_model=CostModel(psi_milli=int(psi)),
                    )
                    group = []
                    for policy_name in cfg.policies:
                        group.append(
                            run_cell(
                                cfg,
                                cohort_cell,
                                graph,
                                policy_name,
                                table_m,
                                mapping=mapping_kind,
                                budget_milli=int(budget),
                                psi_milli=int(psi),
                                p_in=p_in,
                                p_out=p_out,
                                density=None,
                                edge_seed=None,
                            )
                        )
                    if with_ib:
                        attach_ib(group)
                    cells.extend(group)
    return cells


def run_optimal_comparison(cfg: ExperimentConfig, out_dir) -> list[CellResult]:
    cohort0 = base_cohort(cfg)
    table = build_table(cohort0)
    graph = complete_graph(cfg.n)
    cells: list[CellResult] = []
    for budget in cfg.budgets_milli:
        for psi in cfg.psis_milli:
            cohort_cell = replace(
                cohort0, budget_milli=int(budget), cost_model=CostModel(psi_milli=int(psi))
            )
            for policy_name in cfg.policies:
                cells.append(
                    run_cell(
                        cfg,
                        cohort_cell,
                        graph,
                        policy_name,
                        table,
                        mapping="identity",
                        budget_milli=int(budget),
                        psi_milli=int(psi),
                        p_in=1.0,
                        p_out=1.0,
                        density=None,
                        edge_seed=None,
                    )
                )
    write_rows(out_dir / "results.csv", cfg, cells)
    series = []
    for policy_name in cfg.policies:
        pts = [(c.budget_milli / 1000.0, c.mean, c.ci95) for c in cells if c.policy == policy_name]
        series.append(svg.Series(policy_name, pts))
    svg.line_plot(
        out_dir / "mean_reward_vs_budget.svg",
        series,
        title=f"mean reward vs budget (n={cfg.n}, complete graph)",
        xlabel="budget B",
        ylabel="mean R",
    )
    return cells


def run_policy_table(cfg: ExperimentConfig, out_dir) -> list[CellResult]:
    cells = _grid_run(cfg, out_dir, with_ib=True)
    write_rows(out_dir / "results.csv", cfg, cells)
    return cells


def run_sensitivity(cfg: ExperimentConfig, out_dir) -> list[CellResult]:
    cells = _grid_run(cfg, out_dir)
    write_rows(out_dir / "results.csv", cfg, cells)
    if cfg.kind == "sensitivity_budget":
        xs = lambda c: c.budget_milli / 1000.0  # noqa: E731
        xlabel = "budget B"
    elif cfg.kind == "sensitivity_psi":
        xs = lambda c: c.psi_milli / 1000.0  # noqa: E731
        xlabel = "message cost psi"
    else:
        xs = lambda c: (c.p_in, c.p_out)  # noqa: E731
        xlabel = "(p_in, p_out)"
    if cfg.kind != "sensitivity_topology":
        series = []
        for policy_name in cfg.policies:
            pts = [(xs(c), c.mean, c.ci95) for c in cells if c.policy == policy_name]
            series.append(svg.Series(policy_name, pts))
        svg.line_plot(
            out_dir / "mean_reward_sweep.svg",
            series,
            title=cfg.kind,
            xlabel=xlabel,
            ylabel="mean R",
        )
    return cells


def run_edge_density(cfg: ExperimentConfig, out_dir) -> list[CellResult]:
    cohort0 = base_cohort(cfg)
    table = build_table(cohort0)
    budget = int(cfg.budgets_milli[0])
    psi = int(cfg.psis_milli[0])
    cohort_cell = replace(
        cohort0, budget_milli=budget, cost_model=CostModel(psi_milli=psi)
    )
    cells: list[CellResult] = []
    for edge_seed in cfg.edge_seeds:
        for density in cfg.densities:
            graph = density_subgraph(cfg.n, density, edge_seed)
            for policy_name in cfg.policies:
                cells.append(
                    run_cell(
                        cfg,
                        cohort_cell,
                        graph,
                        policy_name,
                        table,
                        mapping="identity",
                        budget_milli=budget,
                        psi_milli=psi,
                        p_in=None,
                        p_out=None,
                        density=float(density),
                        edge_seed=int(edge_seed),
                    )
                )
    write_rows(out_dir / "results.csv", cfg, cells)
    for edge_seed in cfg.edge_seeds:
        series = []
        for policy_name in cfg.policies:
            pts = [
                (c.density, c.mean, c.ci95)
                for c in cells
                if c.policy == policy_name and c.edge_seed == edge_seed
            ]
            series.append(svg.Series(policy_name, pts))
        svg.line_plot(
            out_dir / f"density_seed{edge_seed}.svg",
            series,
            title=f"mean reward vs edge density (edge seed {edge_seed})",
            xlabel="edge density",
            ylabel="mean R",
        )
    return cells


RUNNERS = {
    "optimal_comparison": run_optimal_comparison,
    "policy_table": run_policy_table,
    "sensitivity_budget": run_sensitivity,
    "sensitivity_psi": run_sensitivity,
    "sensitivity_topology": run_sensitivity,
    "edge_density": run_edge_density,
}


def run_experiment(cfg: ExperimentConfig, out_dir) -> list[CellResult]:
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    cells = RUNNERS[cfg.kind](cfg, out_dir)
    files = sorted(p.name for p in out_dir.iterdir() if p.name != "manifest.json")
    write_manifest(out_dir, cfg, started, files)
    return cells
