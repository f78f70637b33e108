"""Numpy fallback for the batch Whittle kernel (used when the compiled
extension is unavailable or disabled via NETRMAB_PURE=1).

The bisection runs vectorized across all (arm, state, active-action) items;
each predicate evaluation is a value-iteration sweep over the whole batch.
"""

from __future__ import annotations

import numpy as np

BRACKET_CAP = 1e6


def _vi_iteration_cap(beta: float, vi_tol: float, v_range: float) -> int:
    return max(64, int(np.ceil(np.log(vi_tol * (1.0 - beta) / v_range) / np.log(beta))) + 16)


def whittle_batch(
    tensors: np.ndarray,
    states: np.ndarray,
    alphas: np.ndarray,
    beta: float,
    vi_tol: float,
    bisect_tol: float,
) -> np.ndarray:
    k = tensors.shape[0]
    p0 = tensors[:, 0]  # (k, 2, 2)
    pa = tensors[np.arange(k), alphas]  # (k, 2, 2)
    r = np.arange(2.0)
    idx = np.arange(k)

    def passive_pref(m: np.ndarray) -> np.ndarray:
        v = np.zeros((k, 2))
        v_range = (1.0 + float(m.max())) / (1.0 - beta)
        cap = _vi_iteration_cap(beta, vi_tol, max(v_range, 1.0))
        passive = active = v
        for _ in range(cap):
            passive = m[:, None] + r[None, :] + beta * np.einsum("kst,kt->ks", p0, v)
            active = r[None, :] + beta * np.einsum("kst,kt->ks", pa, v)
            nv = np.maximum(passive, active)
            delta = np.max(np.abs(nv - v))
            v = nv
            if delta < vi_tol:
                break
        return passive[idx, states] >= active[idx, states]

    lo = np.zeros(k)
    pref_at_zero = passive_pref(lo)
    hi = np.full(k, 1.0 / (1.0 - beta))
    need = ~pref_at_zero & ~passive_pref(hi)
    while np.any(need):
        hi[need] *= 2.0
        if np.any(hi > BRACKET_CAP):
            bad = int(np.argmax(hi > BRACKET_CAP))
            raise ValueError(f"no bracketing subsidy below {BRACKET_CAP} for batch item {bad}")
        need &= ~passive_pref(hi)
    while float(np.max(hi - lo)) > bisect_tol:
        mid = 0.5 * (lo + hi)
        pref = passive_pref(mid)
        hi = np.where(pref, mid, hi)
        lo = np.where(pref, lo, mid)
    return np.where(pref_at_zero, 0.0, 0.5 * (lo + hi))
