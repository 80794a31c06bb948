"""Single-trajectory execution of the non-Markovian jump process.

The rate law, the memory rule (stored table values are the last-written
values) and the two-sided phase update at each jump live here, in two
equivalent forms: a readable pure-python implementation (jump_rates /
sample_next_jump / apply_jump) used by unit tests and log replay, and the
fused kernel in _kernels used by evolve_trajectory for long runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graph import DirectedEdge, PotentialTable
from .hamiltonian import HamiltonianModel


class EngineError(RuntimeError):
    pass


class FrozenTrajectoryError(EngineError):
    pass


class NegativeRateError(EngineError):
    pass


class NonFinitePotentialError(EngineError):
    pass


class TruncationError(EngineError):
    """max_events exceeded; carries the partial result."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar is fixed to 1 in internal units; hbar2/hbar is the model knob."""
    hbar: float = 1.0
    hbar2: float = 1e-3

    def __post_init__(self):
        if self.hbar <= 0:
            raise ValueError("hbar must be > 0")
        if not self.hbar2 > 0:
            raise ValueError("hbar2 must be > 0 (inf allowed)")


@dataclass
class EngineConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    time_dependent_rule: bool = False
    rate_clamp: bool = True
    max_events: int = 20_000_000
    record_events: bool = False

    def __post_init__(self):
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")


@dataclass(frozen=True)
class JumpEvent:
    from_node: int
    to_node: int
    at: float
    waiting_time: float
    rate_total: float


@dataclass
class TrajectoryState:
    node: int
    time: float
    potentials: PotentialTable
    rng: np.ndarray  # uint64[4] xoshiro256++ state

    @classmethod
    def create(cls, potentials: PotentialTable, node: int, seed: int,
               stream: int = 0, time: float = 0.0) -> "TrajectoryState":
        rng = np.zeros(4, dtype=np.uint64)
        _kernels.seed_stream(rng, seed, stream)
        return cls(node=node, time=time, potentials=potentials, rng=rng)

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(self.node, self.time, self.potentials.copy(),
                               self.rng.copy())


class EventLog:
    """Columnar jump log; iterates as JumpEvent records."""

    def __init__(self, from_nodes, to_nodes, times, waits, rates, watch=None):
        self.from_nodes = from_nodes
        self.to_nodes = to_nodes
        self.times = times
        self.waits = waits
        self.rates = rates
        self.watch = watch  # complex A values of the watched edge, or None

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for i in range(len(self.times)):
            yield JumpEvent(int(self.from_nodes[i]), int(self.to_nodes[i]),
                            float(self.times[i]), float(self.waits[i]),
                            float(self.rates[i]))

    def __getitem__(self, i):
        return JumpEvent(int(self.from_nodes[i]), int(self.to_nodes[i]),
                         float(self.times[i]), float(self.waits[i]),
                         float(self.rates[i]))

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self:
                fh.write(json.dumps({"from": ev.from_node, "to": ev.to_node,
                                     "t": ev.at, "dt": ev.waiting_time,
                                     "Lambda": ev.rate_total}) + "\n")


@dataclass
class TrajectoryResult:
    state: TrajectoryState
    n_events: int
    log: EventLog | None = None
    snapshot_nodes: np.ndarray | None = None
    rec_count: np.ndarray | None = None
    rec_sum: np.ndarray | None = None
    n_switches: int = 0


def jump_rates(state: TrajectoryState, config: EngineConfig,
               H: HamiltonianModel | None = None):
    """Rates for every edge touching the current node, from stored potentials.

    Under the time-dependent rule, a stored potential carries the coupling
    scale of its last refresh epoch (the reverse direction's last
    traversal; t=0 if that never happened). Rates read the stored value
    brought to the instantaneous coupling, i.e. times H(t)/H(epoch) -- the
    same factor the slice-ratio rule will apply at the next traversal.
    """
    g = state.potentials.graph
    c = config.constants
    n = state.node
    if config.time_dependent_rule and H is None:
        raise EngineError("time-dependent rule needs the Hamiltonian for rates")
    out = []
    for k in range(int(g.indptr[n]), int(g.indptr[n + 1])):
        d = int(g.edge_out[k])
        a = state.potentials.values[d]
        if config.time_dependent_rule:
            m = int(g.nbr[k])
            t_epoch = state.potentials.last_jump_times[int(g.edge_rev[k])]
            s_old = H.slice_index(t_epoch)
            s_now = H.slice_index(state.time)
            if s_old != s_now:
                h_old = H.slice_matrix(s_old)[n, m]
                if h_old != 0:
                    a = a * (H.slice_matrix(s_now)[n, m] / h_old)
        rate = -a.imag / c.hbar + abs(a) / c.hbar2
        if rate < 0.0:
            if config.rate_clamp:
                rate = 0.0
            else:
                raise NegativeRateError(
                    f"raw rate {rate:.6g} < 0 on edge {n}->{int(g.nbr[k])} "
                    f"(A = {a!r}); hbar2 = {c.hbar2} is too large for this regime")
        out.append((DirectedEdge(n, int(g.nbr[k])), rate))
    return out


def sample_next_jump(state: TrajectoryState, rates) -> JumpEvent:
    """Exponential waiting time + categorical destination from the state's stream.

    Exact for this process: potentials (hence rates) are constant between
    jumps, so the competing-exponentials sampling introduces no
    discretization error.
    """
    total = sum(r for _, r in rates)
    if total <= 0.0:
        raise FrozenTrajectoryError(
            f"total rate is 0 at node {state.node} (t = {state.time}); "
            "all potentials vanish or were clamped")
    u = _kernels.uniform(state.rng)
    wait = -math.log1p(-u) / total
    target = _kernels.uniform(state.rng) * total
    acc = 0.0
    chosen = None
    for edge, r in rates:
        if r > 0.0:
            chosen = edge
            acc += r
            if target < acc:
                break
    return JumpEvent(chosen.from_node, chosen.to_node, state.time + wait,
                     wait, total)


def _slice_at(H: HamiltonianModel, t: float) -> int:
    return H.slice_index(t)


def apply_jump(state: TrajectoryState, event: JumpEvent, H: HamiltonianModel,
               config: EngineConfig) -> TrajectoryState:
    """Apply the memory/update rules for one jump (reference implementation).

    All exponent factors come from post-memory, pre-update values; the two
    multiplications are then applied atomically. A loop jump leaves every
    potential bitwise unchanged (the +/- factors cancel exactly), except
    that the slice-ratio rule still tracks a time-dependent diagonal.
    """
    table = state.potentials
    g = table.graph
    c = config.constants
    n, m = event.from_node, event.to_node
    d_fwd = g.directed_index(n, m)
    d_rev = g.directed_index(m, n)
    tb = table.last_jump_times[d_fwd]
    delta = event.at - tb

    if d_fwd != d_rev:
        phi = 0.0 + 0.0j
        for k in range(int(g.indptr[m]), int(g.indptr[m + 1])):
            phi += table.values[int(g.edge_out[k])]
        if abs(phi.imag * delta / c.hbar) > 700.0:
            raise NonFinitePotentialError(
                f"magnitude factor exp({phi.imag * delta / c.hbar:.3g}) on edge "
                f"{n}->{m} would overflow (jump at t = {event.at})")
        factor = np.exp(-1j * phi * delta / c.hbar)
        table.values[d_fwd] *= factor
        table.values[d_rev] /= factor
        if config.time_dependent_rule:
            s_new = _slice_at(H, event.at)
            s_old = _slice_at(H, tb)
            if s_new != s_old:
                h_new = H.slice_matrix(s_new)[m, n]
                h_old = H.slice_matrix(s_old)[m, n]
                if h_old == 0:
                    raise NonFinitePotentialError(
                        f"H[{m},{n}] = 0 at slice {s_old}; configure a baseline "
                        "coupling floor for time-dependent models")
                table.values[d_rev] *= h_new / h_old
    elif config.time_dependent_rule:
        s_new = _slice_at(H, event.at)
        s_old = _slice_at(H, tb)
        if s_new != s_old:
            h_new = H.slice_matrix(s_new)[n, n]
            h_old = H.slice_matrix(s_old)[n, n]
            if h_old == 0:
                raise NonFinitePotentialError(
                    f"H[{n},{n}] = 0 at slice {s_old}; configure a baseline "
                    "coupling floor for time-dependent models")
            table.values[d_fwd] *= h_new / h_old

    for d in (d_fwd, d_rev):
        v = table.values[d]
        if not (math.isfinite(v.real) and math.isfinite(v.imag)) or abs(v) > 1e300:
            raise NonFinitePotentialError(
                f"potential on edge {n}->{m} became {v!r} after jump at "
                f"t = {event.at} (waiting {event.waiting_time}, delta {delta})")

    table.last_jump_times[d_fwd] = event.at
    state.node = m
    state.time = event.at
    return state


def evolve_trajectory(state: TrajectoryState, H: HamiltonianModel, t_end: float,
                      config: EngineConfig, *,
                      snapshot_times=None,
                      branch_labels=None, branch_t_from: float = 0.0,
                      watch_edge: tuple[int, int] | None = None,
                      collect_recurrence: bool = False) -> TrajectoryResult:
    """Run jumps until the next waiting time would pass t_end (fused kernel).

    The final state's time is set to t_end with no partial update. Raises
    TruncationError (carrying partial results) when max_events is hit, and
    the dedicated engine errors for frozen / negative-rate / non-finite
    outcomes.
    """
    if t_end < state.time:
        raise EngineError(f"t_end {t_end} < current time {state.time}")
    table = state.potentials
    g = table.graph
    c = config.constants
    hvals = H.directed_values(g)

    if snapshot_times is None:
        snap_t = np.empty(0, dtype=np.float64)
    else:
        snap_t = np.asarray(snapshot_times, dtype=np.float64)
        if np.any(np.diff(snap_t) < 0):
            raise EngineError("snapshot_times must be sorted")
        if snap_t.size and snap_t[-1] > t_end:
            raise EngineError("snapshot times beyond t_end")
    snap_nodes = np.full(snap_t.shape, -1, dtype=np.int64)

    rec_count = np.zeros(g.n_directed, dtype=np.float64)
    rec_sum = np.zeros(g.n_directed, dtype=np.float64)

    record = bool(config.record_events)
    if record:
        cap = int(config.max_events)
        log_from = np.zeros(cap, dtype=np.int64)
        log_to = np.zeros(cap, dtype=np.int64)
        log_t = np.zeros(cap, dtype=np.float64)
        log_dt = np.zeros(cap, dtype=np.float64)
        log_rate = np.zeros(cap, dtype=np.float64)
        log_wre = np.zeros(cap if watch_edge else 1, dtype=np.float64)
        log_wim = np.zeros(cap if watch_edge else 1, dtype=np.float64)
    else:
        log_from = log_to = np.zeros(1, dtype=np.int64)
        log_t = log_dt = log_rate = np.zeros(1, dtype=np.float64)
        log_wre = log_wim = np.zeros(1, dtype=np.float64)
    w_idx = g.directed_index(*watch_edge) if watch_edge else -1

    if branch_labels is None:
        labels = np.full(g.node_count, -1, dtype=np.int8)
        count_switches = False
    else:
        labels = np.asarray(branch_labels, dtype=np.int8)
        count_switches = True

    buf = np.zeros(max(g.max_degree, 1), dtype=np.float64)

    node, t, n_events, status, err_edge, n_switches = _kernels.trajectory(
        g.indptr, g.nbr, g.edge_out, g.edge_rev,
        hvals, H.start_times,
        table.values, table.last_jump_times, state.rng,
        int(state.node), float(state.time), float(t_end),
        float(c.hbar), float(c.hbar2),
        bool(config.rate_clamp), bool(config.time_dependent_rule),
        int(config.max_events),
        snap_t, snap_nodes, rec_count, rec_sum,
        record, log_from, log_to, log_t, log_dt, log_rate,
        w_idx, log_wre, log_wim,
        count_switches, labels, float(branch_t_from),
        buf)

    state.node = int(node)
    state.time = float(t)

    log = None
    if record:
        watch = (log_wre[:n_events] + 1j * log_wim[:n_events]) if watch_edge else None
        log = EventLog(log_from[:n_events].copy(), log_to[:n_events].copy(),
                       log_t[:n_events].copy(), log_dt[:n_events].copy(),
                       log_rate[:n_events].copy(), watch)

    result = TrajectoryResult(state=state, n_events=int(n_events), log=log,
                              snapshot_nodes=snap_nodes,
                              rec_count=rec_count if collect_recurrence else None,
                              rec_sum=rec_sum if collect_recurrence else None,
                              n_switches=int(n_switches))

    if status == _kernels.STATUS_OK:
        return result
    if status == _kernels.STATUS_MAX_EVENTS:
        raise TruncationError(
            f"max_events = {config.max_events} exhausted at t = {state.time:.6g} "
            f"< t_end = {t_end} (hbar2 too small for this horizon at this size)",
            result)
    if status == _kernels.STATUS_FROZEN:
        raise FrozenTrajectoryError(
            f"total rate 0 at node {state.node}, t = {state.time:.6g}")
    edge = (int(g.directed_from[err_edge]), int(g.directed_to[err_edge]))
    if status == _kernels.STATUS_NEGATIVE_RATE:
        a = table.values[err_edge]
        raise NegativeRateError(
            f"raw rate < 0 on edge {edge[0]}->{edge[1]} (A = {a!r}); "
            f"hbar2 = {c.hbar2} too large for this regime")
    raise NonFinitePotentialError(
        f"potential on edge {edge[0]}->{edge[1]} became non-finite near "
        f"t = {state.time:.6g} after {n_events} events")


def recurrence_intervals(log: EventLog, graph) -> dict[DirectedEdge, list[float]]:
    """Per directed edge, gaps between successive same-direction jumps."""
    last: dict[int, float] = {}
    gaps: dict[int, list[float]] = {}
    for i in range(len(log)):
        d = graph.directed_index(int(log.from_nodes[i]), int(log.to_nodes[i]))
        t = float(log.times[i])
        if d in last:
            gaps.setdefault(d, []).append(t - last[d])
        last[d] = t
    return {DirectedEdge(int(graph.directed_from[d]), int(graph.directed_to[d])): v
            for d, v in gaps.items()}


def t_rec_summary(rec_count: np.ndarray, rec_sum: np.ndarray) -> float:
    """Median over directed edges of the mean same-direction repeat interval."""
    mask = rec_count > 0
    if not np.any(mask):
        return float("nan")
    means = rec_sum[mask] / rec_count[mask]
    return float(np.median(means))


def t_rec_from_log(log: EventLog, graph) -> float:
    gaps = recurrence_intervals(log, graph)
    if not gaps:
        return float("nan")
    means = [float(np.mean(v)) for v in gaps.values()]
    return float(np.median(means))
