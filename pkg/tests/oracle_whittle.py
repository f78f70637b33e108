"""Independent Whittle-index oracle used by the tests.

Instead of value iteration + bisection (the implementation under test), the
oracle solves the 2-state subsidized MDP exactly: for each of the 4
deterministic branch policies (passive/active per state), the value function
is the solution of a 2x2 linear system and is affine in the subsidy m.
V*(m) is the per-state max over policies, and the index is located by a
dense grid over m (coarse pass, then a fine pass inside the bracketing
cell, valid because passive preference is monotone in m).
"""

import itertools

import numpy as np

GRID_COARSE = 1e-2
GRID_FINE = 1e-5


def _policy_affine(p0, pa, policy, beta):
    """Value of a fixed branch policy as V(m) = base + slope * m.

    policy[s] = 0 means passive in state s (reward m + s, dynamics p0),
    1 means active (reward s, dynamics pa).
    """
    P = np.where(np.array(policy)[:, None] == 0, p0, pa)
    r_base = np.arange(2.0)
    r_slope = (np.array(policy) == 0).astype(float)
    A = np.eye(2) - beta * P
    return np.linalg.solve(A, r_base), np.linalg.solve(A, r_slope)


def passive_preferred_exact(arm, s, alpha, m_values, beta):
    """Vectorized passive-preference predicate over an array of subsidies."""
    m_values = np.atleast_1d(np.asarray(m_values, dtype=float))
    p0 = arm.transitions[0]
    pa = arm.transitions[alpha]
    bases, slopes = [], []
    for policy in itertools.product((0, 1), repeat=2):
        b, k = _policy_affine(p0, pa, policy, beta)
        bases.append(b)
        slopes.append(k)
    values = np.array(bases)[None, :, :] + m_values[:, None, None] * np.array(slopes)[None, :, :]
    v_star = values.max(axis=1)  # (k, 2)
    q_passive = m_values + s + beta * v_star @ p0[s]
    q_active = s + beta * v_star @ pa[s]
    return q_passive >= q_active


def grid_index(arm, s, alpha, beta=0.95, cap=1e6):
    """Smallest grid point (step 1e-5) where passive is preferred."""
    hi = 1.0 / (1.0 - beta)
    while not passive_preferred_exact(arm, s, alpha, hi, beta)[0]:
        hi *= 2.0
        if hi > cap:
            raise RuntimeError("oracle bracket failure")
    coarse = np.arange(0.0, hi + GRID_COARSE, GRID_COARSE)
    pref = passive_preferred_exact(arm, s, alpha, coarse, beta)
    first = int(np.argmax(pref))
    if pref[first] and first == 0:
        return 0.0
    lo = coarse[first - 1]
    fine = np.arange(lo, coarse[first] + GRID_FINE, GRID_FINE)
    pref = passive_preferred_exact(arm, s, alpha, fine, beta)
    return float(fine[int(np.argmax(pref))])
