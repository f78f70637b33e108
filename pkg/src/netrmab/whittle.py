"""Whittle index computation by subsidy bisection over a two-action value function.

For a fixed active action alpha in {1, 2}, the per-state value function is

    V(s) = max( m + s + beta * sum_s' P^0_{s,s'} V(s'),    # passive, subsidized
                s + beta * sum_s' P^alpha_{s,s'} V(s') )   # active

and the index at state s is the infimum subsidy m making the passive branch
weakly preferred there. The passive branch evolves under the no-act dynamics
P^0 (the arms are restless).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import ArmModel, Cohort

VI_TOL = 1e-9
BISECT_TOL = 1e-6
BRACKET_CAP = 1e6


class BracketError(RuntimeError):
    """Active branch preferred even at the largest trial subsidy."""


@dataclass(frozen=True)
class SubsidizedValue:
    """Converged per-state values and which branch attains the max."""

    v: np.ndarray            # shape (2,)
    active_branch: np.ndarray  # shape (2,), bool
    iterations: int


def value_iteration(
    arm: ArmModel,
    alpha: int,
    m: float,
    beta: float,
    tol: float = VI_TOL,
    max_iter: int = 10_000_000,
) -> SubsidizedValue:
    """Iterate the two-branch Bellman backup to a sup-norm fixed point."""
    if alpha not in (1, 2):
        raise ValueError(f"active action must be 1 or 2, got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0,1), got {beta}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    p0 = arm.transitions[0]
    pa = arm.transitions[alpha]
    v = np.zeros(2)
    for it in range(1, max_iter + 1):
        passive = m + np.arange(2) + beta * (p0 @ v)
        active = np.arange(2) + beta * (pa @ v)
        new_v = np.maximum(passive, active)
        delta = np.max(np.abs(new_v - v))
        v = new_v
        if delta < tol:
            return SubsidizedValue(v=v, active_branch=active > passive, iterations=it)
    raise RuntimeError("value iteration failed to converge (misconfigured beta/tol?)")


def passive_preferred(arm: ArmModel, s: int, alpha: int, m: float, beta: float, tol: float = VI_TOL) -> bool:
    sv = value_iteration(arm, alpha, m, beta, tol=tol)
    return not bool(sv.active_branch[s])


def whittle_index(
    arm: ArmModel,
    s: int,
    alpha: int,
    beta: float = 0.95,
    tol: float = BISECT_TOL,
    vi_tol: float = VI_TOL,
) -> float:
    """Infimum subsidy making the passive branch weakly preferred in state s.

    Pure-python reference path: bracket [0, r_max/(1-beta)] with doubling
    expansion, then bisection (the passive preference is monotone in m).
    """
    if s not in (0, 1):
        raise ValueError(f"state must be 0 or 1, got {s}")
    lo = 0.0
    if passive_preferred(arm, s, alpha, lo, beta, vi_tol):
        return 0.0
    hi = 1.0 / (1.0 - beta)
    while not passive_preferred(arm, s, alpha, hi, beta, vi_tol):
        hi *= 2.0
        if hi > BRACKET_CAP:
            raise BracketError(f"no bracketing subsidy below {BRACKET_CAP} for arm {arm.id}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passive_preferred(arm, s, alpha, mid, beta, vi_tol):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class WhittleTable:
    """Index values per (arm, state, active action); the dummy vertex maps to 0."""

    values: np.ndarray  # shape (n, 2, 2): [arm, state, alpha-1]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def index(self, arm_id: int, s: int, alpha: int) -> float:
        if arm_id == -1:
            return 0.0
        return float(self.values[arm_id, s, alpha - 1])

    def resolve(self, states: np.ndarray, alpha: int) -> np.ndarray:
        """Per-vertex index at the current states, with a trailing 0 for the
        dummy vertex so that w[-1] == 0."""
        states = np.asarray(states)
        w = np.zeros(self.n + 1)
        w[: self.n] = self.values[np.arange(self.n), states, alpha - 1]
        return w

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["arm_id", "state", "action", "index"])
            for i in range(self.n):
                for s in (0, 1):
                    for alpha in (1, 2):
                        writer.writerow([i, s, alpha, f"{self.values[i, s, alpha - 1]:.6f}"])


def build_table(cohort: Cohort, vi_tol: float = VI_TOL, bisect_tol: float = BISECT_TOL) -> WhittleTable:
    """Compute the full (arm, state, active action) index table.

    Runs on the compiled kernel when available; the pure-python kernel is
    the numpy-vectorized fallback.
    """
    n = cohort.n
    tensors = np.repeat(cohort.tensor(), 4, axis=0)  # (4n, 3, 2, 2)
    states = np.tile([0, 0, 1, 1], n)
    alphas = np.tile([1, 2, 1, 2], n)
    try:
        flat = _backend.whittle_batch(
            np.ascontiguousarray(tensors),
            states.astype(np.int64),
            alphas.astype(np.int64),
            float(cohort.beta),
            float(vi_tol),
            float(bisect_tol),
        )
    except ValueError as exc:
        raise BracketError(f"index computation failed: {exc}") from exc
    values = np.empty((n, 2, 2))
    values[:, 0, 0] = flat[0::4]
    values[:, 0, 1] = flat[1::4]
    values[:, 1, 0] = flat[2::4]
    values[:, 1, 1] = flat[3::4]
    return WhittleTable(values=values)
