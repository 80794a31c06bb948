"""Benchmark the jitted trajectory kernel against the pure-numpy fallback.

Run as `memhop bench` or `python -m memhop.bench`. The fallback executes
the identical source and RNG stream, so the two paths also cross-check
each other on a short run before timing.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import _kernels
from .graph import build_graph, init_potentials
from .models import complete_graph


def _setup(n_nodes: int, hbar2: float):
    H = complete_graph(n_nodes, 1.0)
    graph = build_graph(H)
    psi0 = np.full(n_nodes, 1.0 / math.sqrt(n_nodes), dtype=complex)
    table = init_potentials(H, psi0, 1e-6, graph)
    hvals = H.directed_values(graph)
    return H, graph, table, hvals


def _run(kernel, seeder, graph, table, hvals, starts, hbar2, t_end, max_events):
    avals = table.values.copy()
    tbar = table.last_jump_times.copy()
    rng = np.zeros(4, dtype=np.uint64)
    seeder(rng, 7, 0)
    empty_f = np.empty(0, dtype=np.float64)
    empty_i = np.empty(0, dtype=np.int64)
    dummy_i = np.zeros(1, dtype=np.int64)
    dummy_f = np.zeros(1, dtype=np.float64)
    rec_c = np.zeros(graph.n_directed)
    rec_s = np.zeros(graph.n_directed)
    labels = np.full(graph.node_count, -1, dtype=np.int8)
    buf = np.zeros(graph.max_degree, dtype=np.float64)
    start = time.perf_counter()
    out = kernel(graph.indptr, graph.nbr, graph.edge_out, graph.edge_rev,
                 hvals, starts, avals, tbar, rng,
                 0, 0.0, t_end, 1.0, hbar2,
                 True, False, max_events,
                 empty_f, empty_i, rec_c, rec_s,
                 False, dummy_i, dummy_i, dummy_f, dummy_f, dummy_f,
                 -1, dummy_f, dummy_f,
                 False, labels, 0.0,
                 buf)
    elapsed = time.perf_counter() - start
    return out, elapsed, avals


def run_bench(n_nodes: int = 8, n_events: int = 2_000_000,
              hbar2: float = 2e-4) -> dict:
    H, graph, table, hvals = _setup(n_nodes, hbar2)
    starts = H.start_times
    # expected event rate: (n-1)/hbar2 while any node is occupied
    t_end = 1.05 * n_events * hbar2 / (n_nodes - 1)

    # cross-check on a short run first
    short_t = min(t_end, 2000 * hbar2 / (n_nodes - 1))
    results = {}
    if _kernels.trajectory_jit is not None:
        out_j, _, av_j = _run(_kernels.trajectory_jit, _kernels.seed_stream_jit,
                              graph, table, hvals, starts, hbar2, short_t, 10 ** 8)
        out_p, _, av_p = _run(_kernels.trajectory_py, _kernels.seed_stream_py,
                              graph, table, hvals, starts, hbar2, short_t, 10 ** 8)
        agree = (out_j[:4] == out_p[:4]) and bool(np.array_equal(av_j, av_p))
        results["paths_agree_on_short_run"] = agree
        print(f"cross-check ({out_p[2]} events): "
              f"{'identical' if agree else 'DIVERGED'}")

    py_budget = min(n_events, 200_000)
    t_py = 1.05 * py_budget * hbar2 / (n_nodes - 1)
    out, elapsed, _ = _run(_kernels.trajectory_py, _kernels.seed_stream_py,
                           graph, table, hvals, starts, hbar2, t_py, 10 ** 8)
    py_rate = out[2] / elapsed
    results["numpy_events_per_s"] = py_rate
    print(f"numpy fallback : {out[2]:>10d} events in {elapsed:8.3f}s "
          f"-> {py_rate:10.3e} events/s")

    if _kernels.trajectory_jit is not None:
        # warm the compile before timing
        _run(_kernels.trajectory_jit, _kernels.seed_stream_jit, graph, table,
             hvals, starts, hbar2, short_t, 10 ** 8)
        out, elapsed, _ = _run(_kernels.trajectory_jit, _kernels.seed_stream_jit,
                               graph, table, hvals, starts, hbar2, t_end, 10 ** 8)
        if out[3] != _kernels.STATUS_OK:
            print(f"note: trajectory ended with status {out[3]} "
                  f"after {out[2]} events (timing still valid per event)")
        jit_rate = out[2] / elapsed
        results["numba_events_per_s"] = jit_rate
        print(f"numba kernel   : {out[2]:>10d} events in {elapsed:8.3f}s "
              f"-> {jit_rate:10.3e} events/s")
        print(f"speedup        : {jit_rate / py_rate:8.1f}x")
        results["speedup"] = jit_rate / py_rate
    else:
        print("numba unavailable; only the fallback was timed")
    return results


if __name__ == "__main__":
    run_bench()
