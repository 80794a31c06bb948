import numpy as np
import pytest

from memhop import _kernels as K
from memhop.graph import build_graph, init_potentials
from memhop.models import complete_graph

needs_numba = pytest.mark.skipif(K.trajectory_jit is None,
                                 reason="numba not importable")


class TestStream:
    def test_uniform_range_and_mean(self):
        rng = np.zeros(4, dtype=np.uint64)
        K.seed_stream_py(rng, 123, 0)
        xs = np.array([K.uniform_py(rng) for _ in range(20000)])
        assert np.all((xs >= 0) & (xs < 1))
        assert abs(xs.mean() - 0.5) < 0.02
        assert abs(np.corrcoef(xs[:-1], xs[1:])[0, 1]) < 0.03

    def test_streams_distinct_and_reproducible(self):
        a = np.zeros(4, dtype=np.uint64)
        b = np.zeros(4, dtype=np.uint64)
        c = np.zeros(4, dtype=np.uint64)
        K.seed_stream_py(a, 7, 0)
        K.seed_stream_py(b, 7, 1)
        K.seed_stream_py(c, 7, 0)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, c)

    @needs_numba
    def test_jit_stream_matches_python(self):
        a = np.zeros(4, dtype=np.uint64)
        b = np.zeros(4, dtype=np.uint64)
        K.seed_stream_py(a, 99, 5)
        K.seed_stream_jit(b, 99, 5)
        assert np.array_equal(a, b)
        for _ in range(5000):
            assert K.uniform_py(a) == K.uniform_jit(b)


def _run(kernel, seeder, t_end, hbar2=1e-3, seed=3):
    H = complete_graph(4, 1.0)
    graph = build_graph(H)
    psi0 = np.full(4, 0.5, dtype=complex)
    table = init_potentials(H, psi0, 1e-6, graph)
    hvals = H.directed_values(graph)
    avals = table.values.copy()
    tbar = table.last_jump_times.copy()
    rng = np.zeros(4, dtype=np.uint64)
    seeder(rng, seed, 0)
    snap_t = np.array([t_end / 2], dtype=np.float64)
    snap_n = np.full(1, -1, dtype=np.int64)
    rec_c = np.zeros(graph.n_directed)
    rec_s = np.zeros(graph.n_directed)
    di = np.zeros(1, dtype=np.int64)
    df = np.zeros(1, dtype=np.float64)
    labels = np.full(graph.node_count, -1, dtype=np.int8)
    buf = np.zeros(graph.max_degree, dtype=np.float64)
    out = kernel(graph.indptr, graph.nbr, graph.edge_out, graph.edge_rev,
                 hvals, H.start_times, avals, tbar, rng,
                 0, 0.0, t_end, 1.0, hbar2, True, False, 10 ** 7,
                 snap_t, snap_n, rec_c, rec_s,
                 False, di, di, df, df, df, -1, df, df,
                 False, labels, 0.0, buf)
    return out, avals, tbar, snap_n


class TestDualPath:
    @needs_numba
    def test_paths_bitwise_identical(self):
        out_p, av_p, tb_p, sn_p = _run(K.trajectory_py, K.seed_stream_py, 3.0)
        out_j, av_j, tb_j, sn_j = _run(K.trajectory_jit, K.seed_stream_jit, 3.0)
        assert out_p[2] > 1000
        assert tuple(out_p)[:4] == tuple(out_j)[:4]
        assert np.array_equal(av_p, av_j)
        assert np.array_equal(tb_p, tb_j)
        assert np.array_equal(sn_p, sn_j)

    def test_status_codes_exported(self):
        assert K.STATUS_OK == 0
        assert {K.STATUS_FROZEN, K.STATUS_MAX_EVENTS, K.STATUS_NONFINITE,
                K.STATUS_NEGATIVE_RATE} == {1, 2, 3, 4}

    def test_backend_name(self):
        assert K.backend_name() in ("numba", "numpy")
