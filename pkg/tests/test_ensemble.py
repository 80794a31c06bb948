import math

import numpy as np
import pytest

from memhop.engine import EngineConfig, PhysicalConstants, TrajectoryState, evolve_trajectory
from memhop.ensemble import (EnsembleConfig, EnsembleError, EnsembleResult,
                             apparatus_epsilon_policy, cat_state_sweep,
                             epsilon_policy, equivariance_distance,
                             floor_policy, measure_t_rec,
                             measurement_statistics, recurrence_scaling_fit,
                             run_ensemble, tv_distance)
from memhop.graph import build_graph, init_potentials, regularize_amplitudes
from memhop.models import measurement_apparatus, random_hermitian, two_level
from memhop.oracle import wavefunction_path


def constants(hbar2):
    return PhysicalConstants(hbar2=hbar2)


class TestRunEnsemble:
    def test_single_trajectory_delta_occupancy(self):
        H = two_level(1.0)
        psi0 = np.array([1, 1]) / np.sqrt(2)
        cfg = EnsembleConfig(n_trajectories=1, base_seed=1, t_end=1.0,
                            snapshot_times=(0.3, 0.6, 1.0),
                            engine=EngineConfig(constants=constants(1e-3)))
        res = run_ensemble(H, psi0, cfg)
        assert res.occupancy.shape == (3, 2)
        assert np.all(res.occupancy.sum(axis=1) == 1)
        assert np.all(res.occupancy.max(axis=1) == 1)

    def test_occupancy_counts_conserved(self):
        H = two_level(1.0)
        psi0 = np.array([1, 1]) / np.sqrt(2)
        cfg = EnsembleConfig(n_trajectories=64, base_seed=5, t_end=0.5,
                            snapshot_times=(0.1, 0.25, 0.5),
                            engine=EngineConfig(constants=constants(1e-3)))
        res = run_ensemble(H, psi0, cfg)
        assert np.all(res.occupancy.sum(axis=1) == 64)

    def test_identical_base_seed_identical_result(self):
        H = random_hermitian(3, 7)
        psi0 = np.array([1, 1, 1]) / np.sqrt(3)
        out = []
        for _ in range(2):
            cfg = EnsembleConfig(n_trajectories=32, base_seed=11, t_end=0.4,
                                snapshot_times=(0.2, 0.4),
                                engine=EngineConfig(constants=constants(1e-3)),
                                epsilon_psi=1e-9)
            out.append(run_ensemble(H, psi0, cfg))
        assert np.array_equal(out[0].occupancy, out[1].occupancy)
        assert np.array_equal(out[0].final_nodes, out[1].final_nodes)

    def test_worker_count_invariance(self):
        H = random_hermitian(3, 7)
        psi0 = np.array([1, 1, 1]) / np.sqrt(3)
        results = []
        for workers in (1, 4):
            cfg = EnsembleConfig(n_trajectories=48, base_seed=13, t_end=0.4,
                                snapshot_times=(0.2, 0.4),
                                engine=EngineConfig(constants=constants(1e-3)),
                                epsilon_psi=1e-9, workers=workers)
            results.append(run_ensemble(H, psi0, cfg))
        assert np.array_equal(results[0].occupancy, results[1].occupancy)
        assert np.array_equal(results[0].final_nodes, results[1].final_nodes)

    def test_failure_fraction_enforced(self):
        H = two_level(1.0)
        psi0 = np.array([1, 1]) / np.sqrt(2)
        cfg = EnsembleConfig(n_trajectories=8, base_seed=1, t_end=5.0,
                            engine=EngineConfig(constants=constants(1e-4),
                                                max_events=50))
        with pytest.raises(EnsembleError, match="truncated"):
            run_ensemble(H, psi0, cfg)

    def test_initial_nodes_sampled_from_floored_density(self):
        H = two_level(1.0)
        psi0 = np.array([1.0, 0.0])
        cfg = EnsembleConfig(n_trajectories=400, base_seed=3, t_end=1e-9,
                            snapshot_times=(1e-9,),
                            engine=EngineConfig(constants=constants(1e-3)),
                            epsilon_psi=1e-6)
        res = run_ensemble(H, psi0, cfg)
        assert res.occupancy[0, 0] == 400  # floored weight on node 1 is 1e-12


class TestEquivariance:
    def test_exactly_sampled_density_sits_at_floor(self):
        rng = np.random.default_rng(21)
        p = np.array([0.55, 0.3, 0.15])
        n = 4000
        counts = rng.multinomial(n, p, size=3)
        res = EnsembleResult(
            n_trajectories=n, base_seed=0, snapshot_times=(0.1, 0.2, 0.3),
            occupancy=counts, final_nodes=np.zeros(n, dtype=np.int64),
            n_events=np.zeros(n, dtype=np.int64),
            t_rec=np.full(n, np.nan), switch_counts=np.zeros(n, dtype=np.int64))
        report = equivariance_distance(res, np.tile(p, (3, 1)), seed=1)
        assert report.all_ok
        assert report.deviation_time is None
        # observed TV is at the sampling-noise scale sqrt(|N|/n)
        for snap in report.snapshots:
            assert snap.tv < 3 * math.sqrt(len(p) / n)

    def test_biased_density_flagged_immediately(self):
        n = 4000
        uniform = np.full((1, 2), n // 2, dtype=np.int64)
        res = EnsembleResult(
            n_trajectories=n, base_seed=0, snapshot_times=(0.0,),
            occupancy=uniform, final_nodes=np.zeros(n, dtype=np.int64),
            n_events=np.zeros(n, dtype=np.int64),
            t_rec=np.full(n, np.nan), switch_counts=np.zeros(n, dtype=np.int64))
        report = equivariance_distance(res, np.array([[0.9, 0.1]]), seed=1)
        assert not report.all_ok
        assert report.deviation_time == 0.0

    def test_tv_decreases_down_the_hbar2_ladder(self):
        # 4-node model: the largest-snapshot TV drops toward the sampling
        # floor as hbar2 shrinks; monotonicity is asserted up to a fraction
        # of the floor noise since the small-hbar2 end saturates there
        H = random_hermitian(4, 18)
        psi0 = None
        from memhop.models import random_state
        psi0 = random_state(4, 1018)
        snaps = (0.4, 0.8, 1.2)
        worst = []
        floor_sigma = 0.0
        for hbar2 in (5e-2, 1e-2, 1e-3):
            cfg = EnsembleConfig(
                n_trajectories=2000, base_seed=91, t_end=max(snaps),
                snapshot_times=snaps,
                engine=EngineConfig(constants=constants(hbar2)),
                epsilon_psi=1e-9)
            res = run_ensemble(H, psi0, cfg)
            path = wavefunction_path(H, psi0 / np.linalg.norm(psi0))
            oracle = np.array([np.abs(path(t)) ** 2 for t in snaps])
            rep = equivariance_distance(res, oracle, seed=92)
            worst.append(max(s.tv for s in rep.snapshots))
            floor_sigma = max(floor_sigma,
                              max(s.floor_std for s in rep.snapshots))
        assert worst[0] > worst[1] > worst[2]
        # the bottom rung has reached the sampling floor; the top is far off
        assert worst[0] > 5 * worst[2]

    def test_two_node_from_basis_state_tracks_rabi(self):
        # ensemble occupancy vs the floored-oracle |psi(t)|^2 within the
        # 3-sigma multinomial floor
        H = two_level(1.0)
        psi0 = np.array([1.0, 0.0])
        hbar2 = 1e-4
        eps = epsilon_policy(hbar2)
        snaps = (0.5, 1.0, 1.5)
        cfg = EnsembleConfig(n_trajectories=2000, base_seed=31, t_end=1.5,
                            snapshot_times=snaps,
                            engine=EngineConfig(constants=constants(hbar2)),
                            epsilon_psi=eps)
        res = run_ensemble(H, psi0, cfg)
        reg = regularize_amplitudes(psi0, eps)
        reg /= np.linalg.norm(reg)
        path = wavefunction_path(H, reg)
        oracle = np.array([np.abs(path(t)) ** 2 for t in snaps])
        report = equivariance_distance(res, oracle, seed=32)
        assert report.all_ok, [s.__dict__ for s in report.snapshots]


class TestScalingFit:
    def test_planted_law_recovered(self):
        rows = [(n, h, 2.7 * h * n)
                for n in (4, 8, 16) for h in (5e-4, 1e-3, 2e-3)]
        fit = recurrence_scaling_fit(rows)
        assert fit.gamma == pytest.approx(1.0, abs=1e-9)
        assert fit.hbar2_exponent == pytest.approx(1.0, abs=1e-9)
        assert math.exp(fit.log_prefactor) == pytest.approx(2.7, rel=1e-9)

    def test_insufficient_grid_rejected(self):
        rows = [(4, 1e-3, 1.0), (8, 1e-3, 2.0), (16, 1e-3, 4.0)]
        with pytest.raises(EnsembleError, match="3 sizes"):
            recurrence_scaling_fit(rows)

    def test_measured_trec_matches_prediction(self):
        # uniform complete graph: t_rec ~ hbar2 * n / g exactly
        from memhop.models import complete_graph
        n, hbar2 = 4, 1e-3
        H = complete_graph(n, 1.0)
        psi0 = np.full(n, 0.5, dtype=complex)
        trec, se = measure_t_rec(H, psi0, hbar2, horizon=300 * hbar2 * n,
                                 n_trajectories=4, base_seed=17)
        assert abs(trec - hbar2 * n) < 0.15 * hbar2 * n


class TestCatSweepSmall:
    def test_two_qubit_endpoints(self):
        sweep = cat_state_sweep(2, [1e-4, 3.0], 200, base_seed=41)
        pts = sorted(sweep.points, key=lambda p: p.hbar2)
        small, large = pts[0], pts[-1]
        assert abs(small.total_spin) < 0.35  # quantum limit: M ~ 0
        assert large.total_spin > 1.6        # stuck near |00>: M ~ 2


class TestMeasurementStatistics:
    def test_definite_state_gives_single_outcome(self):
        hbar2 = 1e-4
        app = measurement_apparatus(
            np.zeros((2, 2)), np.eye(2), 2, math.pi / 2,
            baseline_floor=floor_policy(math.pi / 2),
            pointer_completeness=0.97, pointer_rampdown=0.05)
        cfg = EnsembleConfig(
            n_trajectories=60, base_seed=51, t_end=app.t_cascade_end,
            engine=EngineConfig(constants=constants(hbar2),
                                time_dependent_rule=True),
            epsilon_psi=apparatus_epsilon_policy(hbar2),
            branch_labels=app.branch_labels,
            branch_t_from=app.t_first_cascade_end,
            initial_sampling="physical")
        res = run_ensemble(app.model, app.initial_state(np.array([1.0, 0.0])),
                           cfg)
        stats = measurement_statistics(app, res)
        assert stats.frequencies[0] == pytest.approx(1.0)
        assert stats.counts[1] == 0

    def test_frozen_branch_audit(self):
        # after the trajectory's last exit from a branch, no edge interior to
        # a *different* branch receives any update
        hbar2 = 3e-4
        app = measurement_apparatus(
            0.15 * (math.pi / 2) * np.array([[0, 1], [1, 0]], dtype=complex),
            np.eye(2), 3, math.pi / 2,
            omega_weak=0.05 * math.pi / 2, dwell_time=2.0,
            baseline_floor=floor_policy(math.pi / 2),
            pointer_completeness=0.95, system_during_cascade=False)
        graph = build_graph(app.model)
        psi_sys = np.array([1, 1]) / np.sqrt(2)
        table = init_potentials(app.model, app.initial_state(psi_sys),
                                apparatus_epsilon_policy(hbar2), graph)
        state = TrajectoryState.create(table, 0, 57)
        engine = EngineConfig(constants=constants(hbar2),
                              time_dependent_rule=True, record_events=True,
                              max_events=2_000_000)
        res = evolve_trajectory(state, app.model, app.t_total, engine)
        log = res.log
        assert len(log) > 100

        def branch_of(node):
            return app.decode(int(node))[0]

        last_seen = {}   # branch -> last time the trajectory touched it
        for i in range(len(log)):
            t = float(log.times[i])
            for node in (log.from_nodes[i], log.to_nodes[i]):
                b = branch_of(node)
                if b is not None:
                    last_seen[b] = t
        # every update touches the traversed edge only; so for each branch,
        # updates to its interior edges must not occur after last_seen
        for i in range(len(log)):
            t = float(log.times[i])
            b_from = branch_of(log.from_nodes[i])
            b_to = branch_of(log.to_nodes[i])
            if b_from is not None and b_from == b_to:
                assert t <= last_seen[b_from] + 1e-12

    def test_branch_switches_counted(self):
        # shallow trees with the system coupling live in the dwell window:
        # the outcome-switch channel produces a measurable rate
        from memhop.experiments import confinement_sweep
        sweep = confinement_sweep([2], 3e-4, 300, 777)
        (_, stats, nfail, n) = sweep[0]
        assert stats.switch_rate > 0
        assert nfail <= 0.05 * n


class TestTV:
    def test_tv_distance(self):
        assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert tv_distance([1, 0], [0, 1]) == 1.0
