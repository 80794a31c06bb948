"""Many independent trajectories and the derived experiment statistics.

Each trajectory gets its own potential table and its own counter-derived
RNG stream, so results are reproducible from the base seed and independent
of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .engine import (EngineConfig, EngineError, TrajectoryState,
                     TruncationError, evolve_trajectory, t_rec_summary)
from .graph import PotentialTable, build_graph, init_potentials, regularize_amplitudes
from .hamiltonian import HamiltonianModel


class EnsembleError(RuntimeError):
    pass


@dataclass
class EnsembleConfig:
    n_trajectories: int
    base_seed: int
    t_end: float
    snapshot_times: tuple = ()
    engine: EngineConfig = field(default_factory=EngineConfig)
    epsilon_psi: float = 1e-6
    workers: int = 1
    collect_recurrence: bool = False
    branch_labels: np.ndarray | None = None
    branch_t_from: float = 0.0
    max_failure_fraction: float = 0.01
    # "floored": draw initial nodes from the regularized |psi0'|^2 (matches
    # the floored oracle; the default). "physical": draw from the bare
    # |psi0|^2 -- used when the floor is a pure potential-regularization
    # device and its weight sits on zero-amplitude nodes.
    initial_sampling: str = "floored"

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")
        snaps = tuple(float(t) for t in self.snapshot_times)
        if any(b < a for a, b in zip(snaps, snaps[1:])):
            raise ValueError("snapshot_times must be sorted")
        if snaps and snaps[-1] > self.t_end:
            raise ValueError("snapshot times beyond t_end")
        self.snapshot_times = snaps
        if self.initial_sampling not in ("floored", "physical"):
            raise ValueError("initial_sampling must be 'floored' or 'physical'")


@dataclass
class EnsembleResult:
    n_trajectories: int
    base_seed: int
    snapshot_times: tuple
    occupancy: np.ndarray            # int64 [n_snapshots, n_nodes]
    final_nodes: np.ndarray          # int64 [n_trajectories], -1 on failure
    n_events: np.ndarray             # int64 [n_trajectories]
    t_rec: np.ndarray                # float64 [n_trajectories], nan if unmeasured
    switch_counts: np.ndarray        # int64 [n_trajectories]
    failures: list = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return self.n_trajectories - len(self.failures)

    def occupancy_fractions(self) -> np.ndarray:
        totals = self.occupancy.sum(axis=1, keepdims=True)
        return self.occupancy / np.maximum(totals, 1)

    def to_json(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "base_seed": self.base_seed,
            "snapshot_times": list(self.snapshot_times),
            "occupancy": self.occupancy.tolist(),
            "final_nodes": self.final_nodes.tolist(),
            "n_events_total": int(self.n_events.sum()),
            "failures": [{"index": i, "kind": k, "message": m}
                         for i, k, m in self.failures],
        }


def sample_initial_node(probs_cum: np.ndarray, rng: np.ndarray) -> int:
    u = _kernels.uniform(rng)
    return int(np.searchsorted(probs_cum, u, side="right"))


def run_ensemble(H: HamiltonianModel, psi0: np.ndarray,
                 config: EnsembleConfig) -> EnsembleResult:
    """Run config.n_trajectories independent trajectories.

    Initial nodes are sampled from the floored-and-renormalized |psi0|^2;
    every trajectory carries an independent copy of the initial potential
    table. Per-trajectory errors are recorded and the run continues unless
    more than max_failure_fraction of trajectories fail.
    """
    graph = build_graph(H)
    table0 = init_potentials(H, psi0, config.epsilon_psi, graph)
    H.directed_values(graph)  # warm the per-graph cache before threading

    if config.initial_sampling == "floored":
        reg = regularize_amplitudes(psi0, config.epsilon_psi)
        p0 = np.abs(reg) ** 2
    else:
        p0 = np.abs(np.asarray(psi0, dtype=complex)) ** 2
    p0 /= p0.sum()
    p0_cum = np.cumsum(p0)
    p0_cum[-1] = 1.0 + 1e-12

    n = config.n_trajectories
    snaps = np.asarray(config.snapshot_times, dtype=np.float64)
    occupancy = np.zeros((len(snaps), graph.node_count), dtype=np.int64)
    final_nodes = np.full(n, -1, dtype=np.int64)
    n_events = np.zeros(n, dtype=np.int64)
    t_rec = np.full(n, np.nan, dtype=np.float64)
    switch_counts = np.zeros(n, dtype=np.int64)
    failures: list[tuple[int, str, str]] = []
    snap_nodes_all = np.full((n, len(snaps)), -1, dtype=np.int64)

    def one(i: int):
        state = TrajectoryState.create(table0.copy(), 0, config.base_seed,
                                       stream=i)
        state.node = sample_initial_node(p0_cum, state.rng)
        try:
            res = evolve_trajectory(
                state, H, config.t_end, config.engine,
                snapshot_times=snaps,
                branch_labels=config.branch_labels,
                branch_t_from=config.branch_t_from,
                collect_recurrence=config.collect_recurrence)
        except TruncationError as exc:
            return i, exc.result, ("truncated", str(exc))
        except EngineError as exc:
            return i, None, (type(exc).__name__, str(exc))
        return i, res, None

    def consume(i, res, err):
        if err is not None:
            failures.append((i, err[0], err[1]))
            if res is None:
                return
        n_events[i] = res.n_events
        if err is None:
            final_nodes[i] = res.state.node
            snap_nodes_all[i, :] = res.snapshot_nodes
            switch_counts[i] = res.n_switches
            if config.collect_recurrence:
                t_rec[i] = t_rec_summary(res.rec_count, res.rec_sum)

    if config.workers <= 1:
        for i in range(n):
            consume(*one(i))
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for i, res, err in pool.map(one, range(n)):
                consume(i, res, err)

    if len(failures) > config.max_failure_fraction * n:
        kinds = sorted({k for _, k, _ in failures})
        raise EnsembleError(
            f"{len(failures)}/{n} trajectories failed ({', '.join(kinds)}); "
            f"first: {failures[0][2]}")

    for s in range(len(snaps)):
        col = snap_nodes_all[:, s]
        good = col[col >= 0]
        occupancy[s, :] = np.bincount(good, minlength=graph.node_count)

    return EnsembleResult(
        n_trajectories=n, base_seed=config.base_seed,
        snapshot_times=config.snapshot_times, occupancy=occupancy,
        final_nodes=final_nodes, n_events=n_events, t_rec=t_rec,
        switch_counts=switch_counts,
        failures=failures)


# ---------------------------------------------------------------------------
# equivariance statistics


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


@dataclass
class SnapshotCheck:
    time: float
    tv: float
    tv_ci: tuple[float, float]
    floor_mean: float
    floor_std: float
    threshold: float
    flagged: bool


@dataclass
class EquivarianceReport:
    snapshots: list[SnapshotCheck]
    deviation_time: float | None

    @property
    def all_ok(self) -> bool:
        return all(not s.flagged for s in self.snapshots)


def equivariance_distance(result: EnsembleResult, oracle_probs: np.ndarray, *,
                          n_boot: int = 2000, seed: int = 0) -> EquivarianceReport:
    """TV(empirical occupancy, oracle |psi|^2) per snapshot, with a parametric
    multinomial sampling floor (mean + 3 sigma) and a bootstrap CI on the
    observed TV. deviation_time is the earliest flagged snapshot.
    """
    rng = np.random.default_rng(seed)
    snapshots = []
    deviation_time = None
    for s, t in enumerate(result.snapshot_times):
        counts = result.occupancy[s]
        n = int(counts.sum())
        p_hat = counts / n
        p_oracle = np.asarray(oracle_probs[s], dtype=float)
        p_oracle = p_oracle / p_oracle.sum()
        tv = tv_distance(p_hat, p_oracle)

        floor_draws = rng.multinomial(n, p_oracle, size=n_boot) / n
        floor_tv = 0.5 * np.abs(floor_draws - p_oracle).sum(axis=1)
        floor_mean = float(floor_tv.mean())
        floor_std = float(floor_tv.std(ddof=1))
        threshold = floor_mean + 3.0 * floor_std

        boot_draws = rng.multinomial(n, p_hat, size=n_boot) / n
        boot_tv = 0.5 * np.abs(boot_draws - p_oracle).sum(axis=1)
        ci = (float(np.percentile(boot_tv, 2.5)), float(np.percentile(boot_tv, 97.5)))

        flagged = tv > threshold
        if flagged and deviation_time is None:
            deviation_time = float(t)
        snapshots.append(SnapshotCheck(float(t), tv, ci, floor_mean,
                                       floor_std, threshold, flagged))
    return EquivarianceReport(snapshots, deviation_time)


# ---------------------------------------------------------------------------
# recurrence-time scaling


@dataclass
class ScalingFit:
    gamma: float
    gamma_stderr: float
    hbar2_exponent: float
    hbar2_stderr: float
    log_prefactor: float
    residual_rms: float
    per_hbar2_gamma: dict
    per_size_exponent: dict


def recurrence_scaling_fit(samples) -> ScalingFit:
    """Fit log t_rec = c + gamma*log N + beta*log hbar2 over a (N, hbar2) grid.

    samples: iterable of (n_nodes, hbar2, t_rec). Requires >= 3 distinct
    sizes and >= 3 distinct hbar2 values. Also reports the per-fixed-value
    slopes used as diagnostics.
    """
    rows = [(float(n), float(h), float(t)) for n, h, t in samples]
    sizes = sorted({r[0] for r in rows})
    hbars = sorted({r[1] for r in rows})
    if len(sizes) < 3 or len(hbars) < 3:
        raise EnsembleError(
            f"need >= 3 sizes and >= 3 hbar2 values (got {len(sizes)}, {len(hbars)})")
    logn = np.log([r[0] for r in rows])
    logh = np.log([r[1] for r in rows])
    logt = np.log([r[2] for r in rows])
    design = np.column_stack([np.ones_like(logn), logn, logh])
    coef, res, _, _ = np.linalg.lstsq(design, logt, rcond=None)
    fitted = design @ coef
    resid = logt - fitted
    dof = max(len(rows) - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)

    def slope(xs, ys):
        a = np.column_stack([np.ones_like(xs), xs])
        c, *_ = np.linalg.lstsq(a, ys, rcond=None)
        return float(c[1])

    per_h = {}
    for h in hbars:
        sel = [i for i, r in enumerate(rows) if r[1] == h]
        per_h[h] = slope(logn[sel], logt[sel])
    per_n = {}
    for nn in sizes:
        sel = [i for i, r in enumerate(rows) if r[0] == nn]
        per_n[nn] = slope(logh[sel], logt[sel])

    return ScalingFit(
        gamma=float(coef[1]), gamma_stderr=float(np.sqrt(cov[1, 1])),
        hbar2_exponent=float(coef[2]), hbar2_stderr=float(np.sqrt(cov[2, 2])),
        log_prefactor=float(coef[0]),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        per_hbar2_gamma=per_h, per_size_exponent=per_n)


def measure_t_rec(H: HamiltonianModel, psi0: np.ndarray, hbar2: float, *,
                  horizon: float, n_trajectories: int, base_seed: int,
                  epsilon_psi: float = 1e-6) -> tuple[float, float]:
    """Mean over trajectories of the per-trajectory t_rec summary, with SE."""
    cfg = EnsembleConfig(
        n_trajectories=n_trajectories, base_seed=base_seed, t_end=horizon,
        engine=EngineConfig(constants=_constants(hbar2)),
        epsilon_psi=epsilon_psi, collect_recurrence=True)
    res = run_ensemble(H, psi0, cfg)
    vals = res.t_rec[np.isfinite(res.t_rec)]
    if vals.size == 0:
        raise EnsembleError("no recurrences measured; horizon too short")
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return float(vals.mean()), se


def _constants(hbar2: float):
    from .engine import PhysicalConstants
    return PhysicalConstants(hbar=1.0, hbar2=hbar2)


# ---------------------------------------------------------------------------
# cat-state sweep


@dataclass
class CatPoint:
    hbar2: float
    total_spin: float
    stderr: float
    t_rec_omega: float
    n_events_mean: float


@dataclass
class CatSweepResult:
    n_qubits: int
    points: list[CatPoint]
    crossover_hbar2: float | None

    def is_monotone_within(self, n_sigma: float = 3.0) -> bool:
        pts = sorted(self.points, key=lambda p: p.hbar2)
        for a, b in zip(pts, pts[1:]):
            tol = n_sigma * math.hypot(a.stderr, b.stderr)
            if b.total_spin < a.total_spin - tol:
                return False
        return True


def epsilon_policy(hbar2: float, n_nodes: int = 2) -> float:
    """Amplitude floor that shrinks with hbar2 but keeps early-time phase
    kicks (~hbar2/eps^2) and the floor bias (~eps) simultaneously small.
    The size-dependent cap keeps the floored weight of truly-unpopulated
    nodes (~n_nodes * eps^2) from distorting initial-node sampling."""
    cap = min(0.1, math.sqrt(0.02 / n_nodes))
    return float(min(cap, max(1e-6, hbar2 ** (1.0 / 3.0))))


def apparatus_epsilon_policy(hbar2: float, omega_int: float = 0.0,
                             tau: float = 1.0, n_nodes: int = 2) -> float:
    """Amplitude floor for the measurement apparatus.

    During the pointer-pulse bootstrap the round-trip magnitude kick on the
    root pair scales as hbar2/eps^2, so eps must shrink no faster than
    sqrt(hbar2); the floored weight of unpopulated nodes (~n_nodes * eps^2)
    then forces hbar2 itself well below 1/n_nodes for clean statistics."""
    return float(min(0.02, max(1e-6, 2.5 * math.sqrt(hbar2))))


def floor_policy(omega: float) -> float:
    """Baseline coupling floor for pulsed stochastic runs. The floor only
    has to keep the slice-ratio rule's denominators finite: the turn-on
    rate of a newly-activated edge is carried by the virgin-edge rate rule
    (which reads the instantaneous coupling), so the floor can sit far
    below the builder default. That matters because a floored edge leaks
    the trajectory into never-populated regions at rate ~ floor/hbar2, and
    excursions there degrade the potential tables."""
    return 1e-9 * omega


def cat_state_sweep(n_qubits: int, hbar2_ladder, n_trajectories: int, *,
                    base_seed: int = 2024, tau_gate: float = 1.0,
                    workers: int = 1) -> CatSweepResult:
    """M(hbar2) for the cat-state protocol, decoding sigma_z per qubit from
    each trajectory's terminal node."""
    from .models import cat_state_circuit, spin_tallies, total_spin

    points = []
    for j, hbar2 in enumerate(sorted(float(h) for h in hbar2_ladder)):
        floor = floor_policy(math.pi / (2 * tau_gate))
        eta = float(min(0.05, max(0.02, 2.5 * math.sqrt(hbar2))))
        # slightly incomplete transfers keep every gate's source amplitude
        # away from the exact zero it would otherwise cross at the slice
        # end, where trajectory potentials scramble and strand
        cat = cat_state_circuit(n_qubits, tau_gate, floor, path_admixture=eta,
                                cnot_completeness=0.97)
        cfg = EnsembleConfig(
            n_trajectories=n_trajectories, base_seed=base_seed + j,
            t_end=cat.schedule.duration,
            engine=EngineConfig(constants=_constants(hbar2),
                                time_dependent_rule=True),
            epsilon_psi=1e-8,
            workers=workers, collect_recurrence=True,
            # a small tail of deep-quantum-regime trajectories drives a
            # potential into the overflow guard; they are recorded and
            # excluded from the spin statistics
            max_failure_fraction=0.05,
            initial_sampling="physical")
        res = run_ensemble(cat.model, cat.psi0, cfg)
        ok = res.final_nodes[res.final_nodes >= 0]
        m, _ = total_spin(spin_tallies(ok, cat.register))
        # per-qubit binomial errors understate sigma(M) for cat-correlated
        # bits; attach the empirical std of the per-trajectory spin sum
        per_traj = np.array([
            sum(1 - 2 * cat.register.bit_of(int(node), q)
                for q in range(1, n_qubits + 1)) for node in ok], dtype=float)
        se = float(per_traj.std(ddof=1) / math.sqrt(per_traj.size))
        finite = res.t_rec[np.isfinite(res.t_rec)]
        trec = float(np.median(finite)) if finite.size else float("inf")
        points.append(CatPoint(hbar2, m, se, trec * cat.omega_int,
                               float(res.n_events.mean())))

    crossover = None
    half = n_qubits / 2.0
    pts = sorted(points, key=lambda p: p.hbar2)
    for a, b in zip(pts, pts[1:]):
        if (a.total_spin - half) * (b.total_spin - half) <= 0 and a.total_spin != b.total_spin:
            # linear interpolation in log(hbar2)
            f = (half - a.total_spin) / (b.total_spin - a.total_spin)
            crossover = float(np.exp(np.log(a.hbar2)
                                     + f * (np.log(b.hbar2) - np.log(a.hbar2))))
            break
    return CatSweepResult(n_qubits, points, crossover)


# ---------------------------------------------------------------------------
# measurement statistics


@dataclass
class OutcomeStats:
    frequencies: np.ndarray
    stderrs: np.ndarray
    counts: np.ndarray
    n_undecided: int
    switch_rate: float          # branch switches per unit time per trajectory
    switch_rate_stderr: float
    switch_window: float


def measurement_statistics(apparatus, result: EnsembleResult) -> OutcomeStats:
    """Outcome frequencies from terminal branch decode, multinomial errors,
    and the per-trajectory branch-switch rate over the counting window."""
    counts = np.zeros(apparatus.n_outcomes, dtype=np.int64)
    undecided = 0
    for node in result.final_nodes:
        if node < 0:
            continue
        outcome, _, _ = apparatus.decode(int(node))
        if outcome is None:
            undecided += 1
        else:
            counts[outcome] += 1
    total = int(counts.sum())
    if total == 0:
        raise EnsembleError("no decodable terminal nodes")
    freqs = counts / total
    errs = np.sqrt(freqs * (1 - freqs) / total)

    window = apparatus.t_total - apparatus.t_first_cascade_end
    ok = result.final_nodes >= 0
    per_traj = result.switch_counts[ok] / max(window, 1e-300)
    rate = float(per_traj.mean())
    rate_se = float(per_traj.std(ddof=1) / math.sqrt(per_traj.size)) if per_traj.size > 1 else 0.0
    return OutcomeStats(freqs, errs, counts, undecided, rate, rate_se, window)
