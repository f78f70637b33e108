"""Arm MDPs, cohorts, cost model, structural validation and random generation.

Each arm is a 2-state / 3-action MDP with transition tensor P[a, s, s'].
Actions are 0 = no-act, 1 = message, 2 = pull. All budget arithmetic is
carried out in integer milli-units (pull = 1000) so that feasibility
comparisons against the per-timestep budget are exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

NOACT, MESSAGE, PULL = 0, 1, 2
ACTIONS = (NOACT, MESSAGE, PULL)
PULL_COST_MILLI = 1000

# strictness margin used by the arm sampler so constraint inequalities
# hold with slack (and bisection-vs-oracle comparisons are stable)
SAMPLE_MARGIN = 1e-3

ROW_SUM_TOL = 1e-12


class StructuralError(ValueError):
    """Raised when an arm violating the structural constraints is rejected."""


@dataclass(frozen=True)
class CostModel:
    """Cost vector [0, psi, 1] in milli-units; pull is fixed at 1000."""

    psi_milli: int = 500

    def __post_init__(self):
        if not isinstance(self.psi_milli, (int, np.integer)):
            raise TypeError("psi_milli must be an integer milli-unit value")
        if not 0 <= self.psi_milli < PULL_COST_MILLI:
            raise ValueError(f"psi_milli must be in [0, 1000), got {self.psi_milli}")

    @property
    def psi(self) -> float:
        return self.psi_milli / PULL_COST_MILLI

    def cost_milli(self, action: int) -> int:
        if action == NOACT:
            return 0
        if action == MESSAGE:
            return int(self.psi_milli)
        if action == PULL:
            return PULL_COST_MILLI
        raise ValueError(f"unknown action {action}")

    def cost_vector_milli(self) -> np.ndarray:
        return np.array([0, self.psi_milli, PULL_COST_MILLI], dtype=np.int64)


@dataclass(frozen=True)
class ArmModel:
    """One arm: transition tensor indexed (action, state, next_state)."""

    transitions: np.ndarray
    id: int = 0

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=np.float64)
        if t.shape != (3, 2, 2):
            raise ValueError(f"transition tensor must be 3x2x2, got {t.shape}")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "transitions", t)

    def p_up(self, state: int, action: int) -> float:
        """P^a_{s,1}: probability of landing in the desirable state."""
        if state not in (0, 1):
            raise ValueError(f"state must be 0 or 1, got {state}")
        if action not in ACTIONS:
            raise ValueError(f"action must be in {{0,1,2}}, got {action}")
        return float(self.transitions[action, state, 1])


def validate_structural(arm: ArmModel) -> list[str]:
    """Check the structural constraints; return a list of violations (empty = ok).

    Violation kinds: malformed rows (not summing to 1), entries outside the
    open interval (0,1), constraint set (i) P^a_{0,1} < P^a_{1,1}, and
    constraint set (ii) strict monotonicity of P^a_{s,1} in the action.
    """
    t = arm.transitions
    violations: list[str] = []
    for a in ACTIONS:
        for s in (0, 1):
            row = t[a, s]
            if abs(row.sum() - 1.0) > ROW_SUM_TOL:
                violations.append(f"row_sum: P^{a}_{{{s},.}} sums to {row.sum()!r}")
    if np.any(t <= 0.0) or np.any(t >= 1.0):
        bad = np.argwhere((t <= 0.0) | (t >= 1.0))
        for a, s, sp in bad:
            violations.append(f"entry_range: P^{a}_{{{s},{sp}}}={t[a, s, sp]!r} not in (0,1)")
    for a in ACTIONS:
        if not t[a, 0, 1] < t[a, 1, 1]:
            violations.append(f"constraint_i: P^{a}_{{0,1}}={t[a, 0, 1]!r} !< P^{a}_{{1,1}}={t[a, 1, 1]!r}")
    for a in (0, 1):
        for s in (0, 1):
            if not t[a, s, 1] < t[a + 1, s, 1]:
                violations.append(
                    f"constraint_ii: P^{a}_{{{s},1}}={t[a, s, 1]!r} !< P^{a + 1}_{{{s},1}}={t[a + 1, s, 1]!r}"
                )
    return violations


def is_valid(arm: ArmModel) -> bool:
    return not validate_structural(arm)


def expected_next_desirable(arm: ArmModel, s: int, a: int) -> float:
    """E[r_{t+1} | s, a] under r(s) = s, i.e. the tensor entry P^a_{s,1}."""
    return arm.p_up(s, a)


def sample_arm(rng: np.random.Generator, arm_id: int = 0) -> ArmModel:
    """Draw a random arm satisfying the structural constraints.

    Row P^._{0,1} is an ascending triple with gaps >= SAMPLE_MARGIN; row
    P^._{1,1} adds a shared positive offset plus an ascending jitter, so both
    constraint sets hold strictly by construction.
    """
    m = SAMPLE_MARGIN
    x = np.sort(rng.uniform(0.05, 0.70, size=3)) + np.array([0.0, m, 2 * m])
    jitter = np.sort(rng.uniform(0.0, 0.05, size=3))
    offset = rng.uniform(m, 1.0 - 1e-3 - x[2] - 0.05)
    y = x + offset + jitter
    t = np.empty((3, 2, 2), dtype=np.float64)
    for a in ACTIONS:
        t[a, 0, 1] = x[a]
        t[a, 1, 1] = y[a]
    t[:, :, 0] = 1.0 - t[:, :, 1]
    arm = ArmModel(transitions=t, id=arm_id)
    assert not validate_structural(arm)
    return arm


@dataclass(frozen=True)
class Cohort:
    """Ordered arm collection plus the shared cost model, discount and budget."""

    arms: tuple[ArmModel, ...]
    cost_model: CostModel = field(default_factory=CostModel)
    beta: float = 0.95
    budget_milli: int = PULL_COST_MILLI
    horizon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        ids = [a.id for a in self.arms]
        if ids != list(range(len(self.arms))):
            raise ValueError("arm ids must be 0..n-1 in order")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0,1), got {self.beta}")
        if self.budget_milli < 0:
            raise ValueError("budget must be >= 0")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    @property
    def n(self) -> int:
        return len(self.arms)

    def tensor(self) -> np.ndarray:
        """Stacked transition tensors, shape (n, 3, 2, 2)."""
        return np.stack([a.transitions for a in self.arms])

    def to_json(self) -> str:
        doc = {
            "beta": self.beta,
            "budget_milli": int(self.budget_milli),
            "psi_milli": int(self.cost_model.psi_milli),
            "horizon": int(self.horizon),
            "arms": [a.transitions.tolist() for a in self.arms],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Cohort":
        doc = json.loads(text)
        arms = tuple(
            ArmModel(transitions=np.asarray(t, dtype=np.float64), id=i)
            for i, t in enumerate(doc["arms"])
        )
        return cls(
            arms=arms,
            cost_model=CostModel(psi_milli=int(doc["psi_milli"])),
            beta=float(doc["beta"]),
            budget_milli=int(doc["budget_milli"]),
            horizon=int(doc["horizon"]),
        )


def sample_cohort(
    rng: np.random.Generator,
    n: int,
    psi_milli: int = 500,
    beta: float = 0.95,
    budget_milli: int = PULL_COST_MILLI,
    horizon: int = 1,
) -> Cohort:
    arms = tuple(sample_arm(rng, arm_id=i) for i in range(n))
    return Cohort(
        arms=arms,
        cost_model=CostModel(psi_milli=psi_milli),
        beta=beta,
        budget_milli=budget_milli,
        horizon=horizon,
    )
