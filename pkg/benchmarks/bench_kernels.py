"""Compare the compiled kernels against the pure-python fallbacks.

Usage: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from netrmab import _backend
from netrmab._pykernels import whittle_batch as whittle_pure
from netrmab.core import CostModel, sample_cohort
from netrmab.graph import sbm_generate, uniform_block_sizes
from netrmab.greta import flatten_graph, greta_step


def bench_whittle():
    rng = np.random.default_rng(0)
    cohort = sample_cohort(rng, 250)
    tensors = np.ascontiguousarray(np.repeat(cohort.tensor(), 4, axis=0))
    states = np.tile(np.array([0, 0, 1, 1]), cohort.n)
    alphas = np.tile(np.array([1, 2, 1, 2]), cohort.n)
    args = (tensors, states, alphas, 0.95, 1e-9, 1e-6)
    t0 = time.perf_counter()
    pure = whittle_pure(*args)
    t_pure = time.perf_counter() - t0
    print(f"whittle_batch  ({len(states)} items)")
    print(f"  pure     {t_pure * 1000:8.1f} ms")
    if _backend.HAVE_COMPILED:
        from netrmab import _ckernels

        t0 = time.perf_counter()
        comp = _ckernels.whittle_batch(*args)
        t_comp = time.perf_counter() - t0
        print(f"  compiled {t_comp * 1000:8.1f} ms   ({t_pure / t_comp:5.1f}x)")
        print(f"  max |diff| = {np.max(np.abs(pure - comp)):.2e}")
    else:
        print("  compiled kernel unavailable")


def bench_greta():
    rng = np.random.default_rng(1)
    n = 100
    graph = sbm_generate(uniform_block_sizes(n), 1.0, 1.0, rng)
    cm = CostModel(psi_milli=500)
    w1 = np.concatenate([rng.uniform(0, 1, n), [0.0]])
    w2 = np.concatenate([rng.uniform(0, 1, n), [0.0]])
    flat = flatten_graph(graph)
    reps = 20
    print(f"greta_step  (n={n}, |E|={graph.num_edges}, B=10, psi=0.5)")
    t0 = time.perf_counter()
    for _ in range(reps):
        a_pure = greta_step(graph, 10_000, cm, w1, w2, backend="pure")
    t_pure = (time.perf_counter() - t0) / reps
    print(f"  pure     {t_pure * 1000:8.1f} ms/step")
    if _backend.HAVE_COMPILED:
        t0 = time.perf_counter()
        for _ in range(reps):
            a_comp = greta_step(graph, 10_000, cm, w1, w2, backend="compiled", flat=flat)
        t_comp = (time.perf_counter() - t0) / reps
        print(f"  compiled {t_comp * 1000:8.1f} ms/step ({t_pure / t_comp:5.1f}x)")
        print(f"  action vectors identical: {np.array_equal(a_pure, a_comp)}")
    else:
        print("  compiled kernel unavailable")


if __name__ == "__main__":
    print(f"backend: {_backend.backend_name()}")
    bench_whittle()
    bench_greta()
