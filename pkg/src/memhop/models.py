"""Builders for every system the experiments use.

Elementary graph models, qubit registers with gate-pulse schedules (each
gate is a Hermitian generator pulse with exp(-i*K*tau) equal to the named
unitary), and the system/pointer/environment measurement apparatus whose
outcome branches grow isomorphic, mutually disconnected sub-networks.

Bit order convention: qubit 1 is the most significant bit of the node
index. The same convention applies to environment qubits within their own
index block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import HamiltonianModel

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


class ModelError(ValueError):
    pass


def two_level(g: float = 1.0) -> HamiltonianModel:
    if g <= 0:
        raise ModelError("coupling g must be > 0")
    return HamiltonianModel.constant(np.array([[0, g], [g, 0]], dtype=complex))


def ring(n: int, g: float = 1.0) -> HamiltonianModel:
    if n < 2:
        raise ModelError("ring needs n >= 2")
    if g <= 0:
        raise ModelError("coupling g must be > 0")
    h = np.zeros((n, n), dtype=complex)
    for i in range(n):
        j = (i + 1) % n
        h[i, j] = g
        h[j, i] = g
    return HamiltonianModel.constant(h)


def complete_graph(n: int, g: float = 1.0) -> HamiltonianModel:
    if n < 2:
        raise ModelError("complete graph needs n >= 2")
    if g <= 0:
        raise ModelError("coupling g must be > 0")
    h = np.full((n, n), g, dtype=complex)
    np.fill_diagonal(h, 0.0)
    return HamiltonianModel.constant(h)


def random_hermitian(n: int, seed: int, *, diagonal: bool = True,
                     scale: float = 1.0) -> HamiltonianModel:
    """Dense random Hermitian test fixture with O(scale) entries."""
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (r + r.conj().T) * (scale / 2.0)
    if not diagonal:
        np.fill_diagonal(h, 0.0)
    else:
        np.fill_diagonal(h, np.real(np.diag(h)))
    return HamiltonianModel.constant(h)


def random_state(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class QubitRegister:
    n_qubits: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ModelError("need at least one qubit")

    @property
    def n_nodes(self) -> int:
        return 2 ** self.n_qubits

    def index_of(self, bits) -> int:
        """bits[0] is qubit 1 (most significant)."""
        if len(bits) != self.n_qubits:
            raise ModelError("bit count mismatch")
        out = 0
        for b in bits:
            out = (out << 1) | int(b)
        return out

    def bits_of(self, index: int) -> tuple[int, ...]:
        return tuple((index >> (self.n_qubits - 1 - i)) & 1
                     for i in range(self.n_qubits))

    def bit_of(self, index: int, qubit: int) -> int:
        """qubit is 1-based; qubit 1 is the MSB."""
        return (index >> (self.n_qubits - qubit)) & 1


def _embed(op: np.ndarray, targets: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Embed an operator on `targets` (1-based, MSB-first) into the register."""
    per_site = [_I2] * n_qubits
    k = int(round(math.log2(op.shape[0])))
    if k == 1:
        per_site[targets[0] - 1] = op
        out = per_site[0]
        for p in per_site[1:]:
            out = np.kron(out, p)
        return out
    # multi-qubit op: permute target axes together, apply, permute back
    dim = 2 ** n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    others = [q for q in range(1, n_qubits + 1) if q not in targets]
    reg = QubitRegister(n_qubits)
    sub = QubitRegister(k)
    for col in range(dim):
        bits = reg.bits_of(col)
        tbits = tuple(bits[q - 1] for q in targets)
        j = sub.index_of(tbits)
        for i in range(op.shape[0]):
            v = op[i, j]
            if v == 0:
                continue
            new_bits = list(bits)
            ibits = sub.bits_of(i)
            for pos, q in enumerate(targets):
                new_bits[q - 1] = ibits[pos]
            out[reg.index_of(new_bits), col] += v
    return out


@dataclass(frozen=True)
class GateOp:
    """A named unitary realized as a generator pulse: exp(-i*K*tau) = U."""
    name: str
    targets: tuple[int, ...]
    duration: float
    generator: np.ndarray  # on the target qubits only
    unitary: np.ndarray    # on the target qubits only


def superposition_gate(tau: float) -> GateOp:
    """|0> -> (|0>+|1>)/sqrt(2) (Hadamard-like, up to a global phase)."""
    k = (math.pi / (2 * tau)) * (_X + _Z) / math.sqrt(2)
    u = -1j * (_X + _Z) / math.sqrt(2)
    return GateOp("superpose", (1,), tau, k, u)


def cnot_gate(control: int, target: int, tau: float,
              completeness: float = 1.0) -> GateOp:
    # exp(-i*K*tau) is exactly CNOT for K = (pi/2tau) P1 (n*I - X) with
    # n = 1 mod 4. The minimal n = 1 is unusable here: its diagonal equals
    # minus its off-diagonal, so a freshly-floored pair (stored potentials
    # at ratio 1) makes the node potential sum vanish identically and the
    # update rules freeze at a 50/50 fixed point instead of tracking the
    # transfer. n = -3 is the smallest choice that breaks the cancellation.
    #
    # completeness < 1 under-rotates the transfer only (the diagonal part
    # keeps its full strength): a complete transfer drives the source
    # amplitude through an exact zero at the slice end, where stochastic
    # trajectories scramble their pair potentials and strand.
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    k = (math.pi / (2 * tau)) * np.kron(p1, -3.0 * _I2 - completeness * _X)
    half = math.pi * completeness / 2
    block = np.array([[math.cos(half), 1j * math.sin(half)],
                      [1j * math.sin(half), math.cos(half)]], dtype=complex)
    phase = np.exp(1.5j * math.pi)
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = phase * block
    if completeness == 1.0:
        u = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                     dtype=complex)
    return GateOp("cnot", (control, target), tau, k, u)


@dataclass
class GateSchedule:
    register: QubitRegister
    ops: list[GateOp] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return sum(op.duration for op in self.ops)

    def slice_starts(self) -> list[float]:
        starts = [0.0]
        for op in self.ops[:-1]:
            starts.append(starts[-1] + op.duration)
        return starts

    def to_hamiltonian(self, baseline_floor: float) -> HamiltonianModel:
        """Piecewise-constant pulse Hamiltonian; a final floor-only hold slice
        keeps the model defined past the last gate."""
        n = self.register.n_qubits
        dim = 2 ** n
        mats = []
        for op in self.ops:
            mats.append(_embed(op.generator, op.targets, n))
        mats.append(np.zeros((dim, dim), dtype=complex))
        starts = self.slice_starts() + [self.duration]
        return HamiltonianModel.piecewise(starts, mats, baseline_floor=baseline_floor)

    def unitary(self) -> np.ndarray:
        """Exact product of the named gate unitaries (for oracle checks)."""
        n = self.register.n_qubits
        dim = 2 ** n
        u = np.eye(dim, dtype=complex)
        for op in self.ops:
            u = _embed(op.unitary, op.targets, n) @ u
        return u


@dataclass
class CatCircuit:
    register: QubitRegister
    schedule: GateSchedule
    model: HamiltonianModel
    psi0: np.ndarray
    target: np.ndarray
    tau_gate: float
    omega_int: float


def cat_state_circuit(n_qubits: int, tau_gate: float = 1.0,
                      baseline_floor: float = 1e-6, *,
                      path_admixture: float = 0.0,
                      cnot_completeness: float = 1.0) -> CatCircuit:
    """Superpose qubit 1, then n_qubits-1 controlled-nots from qubit 1.

    The schedule applied to |0...0> produces (|0...0> + |1...1>)/sqrt(2) up
    to a global phase.

    path_admixture > 0 models an imperfectly reset register: psi0 gains
    eta * |1> x (|0> + eta|1>)^(n-1), i.e. amplitude eta^(1+k) on every
    excited-control state with k target bits set. Stochastic runs need it:
    a gate pair whose target is exactly zero-amplitude bootstraps from the
    floored ratio-1 stored potentials, which do not converge to the
    transfer; the admixture gives every gate-reachable pair (the straight
    cat path *and* the recovery edges out of under-rotation residues) a
    stored amplitude ratio eta. Keep eta small: the |10..0> component
    evolves into the cat with a relative minus sign and shifts the final
    total spin by ~2*eta per qubit.
    """
    if n_qubits < 2:
        raise ModelError("cat state needs n_qubits >= 2")
    if baseline_floor <= 0:
        raise ModelError("baseline_floor must be > 0")
    if not 0.0 <= path_admixture < 0.5:
        raise ModelError("path_admixture must be in [0, 0.5)")
    if not 0.5 <= cnot_completeness <= 1.0:
        raise ModelError("cnot_completeness must be in [0.5, 1]")
    reg = QubitRegister(n_qubits)
    ops = [superposition_gate(tau_gate)]
    for q in range(2, n_qubits + 1):
        ops.append(cnot_gate(1, q, tau_gate, completeness=cnot_completeness))
    sched = GateSchedule(reg, ops)
    model = sched.to_hamiltonian(baseline_floor)
    psi0 = np.zeros(reg.n_nodes, dtype=complex)
    psi0[0] = 1.0
    if path_admixture > 0.0:
        eta = path_admixture
        tail = np.array([1.0], dtype=complex)
        for _ in range(n_qubits - 1):
            tail = np.kron(tail, np.array([1.0, eta], dtype=complex))
        psi0[reg.n_nodes // 2:] += eta * tail
        psi0 /= np.linalg.norm(psi0)
    target = np.zeros(reg.n_nodes, dtype=complex)
    target[0] = 1 / math.sqrt(2)
    target[-1] = 1 / math.sqrt(2)
    omega_int = math.pi / (2 * tau_gate)
    return CatCircuit(reg, sched, model, psi0, target, tau_gate, omega_int)


def total_spin(tallies) -> tuple[float, float]:
    """M = sum_i <sigma_z^i> from per-qubit (n_plus, n_minus) tallies.

    <sigma_z^i> is (N+ - N-)/N with a binomial standard error; the errors
    are combined in quadrature.
    """
    m = 0.0
    var = 0.0
    for n_plus, n_minus in tallies:
        total = n_plus + n_minus
        if total == 0:
            raise ModelError("empty ensemble")
        p = n_plus / total
        m += 2.0 * p - 1.0
        var += 4.0 * p * (1.0 - p) / total
    return m, math.sqrt(var)


def spin_tallies(nodes, register: QubitRegister):
    """Per-qubit (N+, N-) tallies from terminal node indices (bit 0 -> +1)."""
    nodes = np.asarray(nodes)
    if nodes.size == 0:
        raise ModelError("empty ensemble")
    tallies = []
    for q in range(1, register.n_qubits + 1):
        bits = (nodes >> (register.n_qubits - q)) & 1
        n_minus = int(bits.sum())
        tallies.append((int(nodes.size - n_minus), n_minus))
    return tallies


@dataclass
class ApparatusModel:
    """System x pointer x environment-qubit chain.

    Pointer basis: index 0 is the ready state, index 1+m the outcome-m
    state. A pointer pulse rotates ready -> outcome_m conditioned on the
    measured system state; d_env cascade pulses then copy the pointer
    outcome into successive environment qubits (outcome m writes the env
    qubit to (|0> + (-1)^m |1>)/sqrt(2) for the two-outcome case, keeping
    the outcome trees isomorphic with identical coupling magnitudes).
    """
    system_dim: int
    n_outcomes: int
    d_env: int
    omega_int: float
    omega_weak: float
    tau_pulse: float
    dwell_time: float
    phi_basis: np.ndarray
    model: HamiltonianModel
    branch_labels: np.ndarray
    t_first_cascade_end: float
    t_cascade_end: float
    t_total: float
    pointer_completeness: float = 1.0

    @property
    def pointer_dim(self) -> int:
        return self.n_outcomes + 1

    @property
    def env_dim(self) -> int:
        return 2 ** self.d_env

    @property
    def n_nodes(self) -> int:
        return self.system_dim * self.pointer_dim * self.env_dim

    def node_index(self, sys_idx: int, pointer_idx: int, env_bits: int) -> int:
        return (sys_idx * self.pointer_dim + pointer_idx) * self.env_dim + env_bits

    def decode(self, node: int) -> tuple[int | None, int, int]:
        """(outcome or None if pointer still ready, system index, env bits)."""
        env = node % self.env_dim
        rest = node // self.env_dim
        pointer = rest % self.pointer_dim
        sys_idx = rest // self.pointer_dim
        outcome = pointer - 1 if pointer >= 1 else None
        return outcome, sys_idx, env

    def initial_state(self, psi_sys: np.ndarray,
                      ready_admixture: float = 0.0) -> np.ndarray:
        """Joint state |psi_sys>|ready>|0...0>.

        ready_admixture > 0 adds a small outcome-correlated component
        eta*|phi_n>|out_n> per branch (an imperfectly reset pointer). The
        admixture is exactly Born-preserving -- every branch scales by the
        same factor -- and it gives the stochastic bootstrap finite support
        on the pointer-pulse targets without flooring the whole space.
        """
        psi_sys = np.asarray(psi_sys, dtype=complex)
        if psi_sys.shape != (self.system_dim,):
            raise ModelError("system state dimension mismatch")
        if not 0.0 <= ready_admixture < 0.5:
            raise ModelError("ready_admixture must be in [0, 0.5)")
        env = np.zeros(self.env_dim, dtype=complex)
        env[0] = 1.0
        eta = ready_admixture
        coeffs = self.phi_basis.conj().T @ psi_sys
        joint_sp = np.zeros(self.system_dim * self.pointer_dim, dtype=complex)
        for n in range(self.n_outcomes):
            pointer = np.zeros(self.pointer_dim, dtype=complex)
            pointer[0] = math.sqrt(1.0 - eta * eta)
            pointer[n + 1] = eta
            joint_sp += coeffs[n] * np.kron(self.phi_basis[:, n], pointer)
        out = np.kron(joint_sp, env)
        return out / np.linalg.norm(out)


def measurement_apparatus(system_hamiltonian: np.ndarray, phi_basis: np.ndarray,
                          d_env: int, omega_int: float, *,
                          omega_weak: float = 0.0, tau_pulse: float | None = None,
                          dwell_time: float = 0.0,
                          baseline_floor: float = 1e-6,
                          pointer_completeness: float = 1.0,
                          pointer_detuning: float | None = None,
                          pointer_rampdown: float = 0.0,
                          system_during_cascade: bool = True) -> ApparatusModel:
    """Build the joint model for a projective measurement of the phi basis.

    system_hamiltonian acts on the system factor throughout (it supplies
    any inter-tree links); the pointer pulse realizes
    |phi_n>|ready> -> |phi_n>|outcome_n> in one slice, then each of d_env
    cascade pulses imprints the outcome on one environment qubit. With
    omega_weak > 0 the pointer coupling stays on at that reduced strength
    after its pulse, which keeps the branch-switch channel physically live.

    pointer_completeness < 1 under-rotates the pointer swing by that factor,
    leaving a small residual ready amplitude. Stochastic runs use ~0.95-0.98:
    an exactly-zero residual is an amplitude zero crossing, where trajectory
    potentials take O(1) kicks; a slightly incomplete swing is both the
    physically honest apparatus and numerically tame. Outcome frequencies
    conditioned on a decided pointer are unaffected (each branch scales by
    the same factor).

    pointer_detuning adds a diagonal energy to the ready layer after the
    pointer pulse (default 5*omega_weak). Without it a live omega_weak
    channel slowly un-measures the pointer coherently and the ready
    amplitude swings through zero mid-run; detuning makes the coherent
    return off-resonant while leaving the incoherent root-hop switching
    channel open.

    pointer_rampdown > 0 keeps the pointer coupling at a tenth of its pulse
    strength for that long into the first cascade slice before it drops to
    the floor. Because waiting times are sampled from pre-boundary rates,
    a hard turn-off races every root-sitting trajectory across the dying
    edge into the ready dead end; the ramp makes the live cascade edge win
    that race.

    system_during_cascade=False realizes the omega_int >> omega_sys limit
    for the cascade: the system Hamiltonian still acts during the pointer
    pulse and the dwell window (where it opens the outcome-switching path
    branch root -> ready layer -> other column -> re-measure) but is
    frozen while the cascade pulses run, so no cross-column interface
    sits under an active pulse.
    """
    hs = np.asarray(system_hamiltonian, dtype=complex)
    dsys = hs.shape[0]
    phi = np.asarray(phi_basis, dtype=complex)
    if phi.shape[0] != dsys:
        raise ModelError("phi basis rows must match system dimension")
    n_out = phi.shape[1]
    gram = phi.conj().T @ phi
    if not np.allclose(gram, np.eye(n_out), atol=1e-9):
        raise ModelError(
            f"measured basis is not orthonormal; Gram matrix =\n{np.round(gram, 6)}")
    if d_env < 0:
        raise ModelError("d_env must be >= 0")
    if d_env > 0 and n_out > 2:
        raise ModelError("the +/- cascade encoding supports two outcomes")
    if omega_int <= 0:
        raise ModelError("omega_int must be > 0")
    if not 0.5 <= pointer_completeness <= 1.0:
        raise ModelError("pointer_completeness must be in [0.5, 1]")
    if tau_pulse is None:
        tau_pulse = math.pi / (2 * omega_int)

    pdim = n_out + 1
    env_dim = 2 ** d_env
    dim = dsys * pdim * env_dim
    i_env = np.eye(env_dim, dtype=complex)
    i_pointer = np.eye(pdim, dtype=complex)
    i_sys = np.eye(dsys, dtype=complex)

    h_sys = np.kron(np.kron(hs, i_pointer), i_env)

    # pointer generator: rotate ready -> outcome_n conditioned on |phi_n>.
    # The coupling acts only at the tree roots (environment still in |0...0>):
    # deeper inside a branch there is no pointer edge, so switching outcome
    # requires the trajectory to come all the way back to a root.
    k_pointer = np.zeros((dsys * pdim, dsys * pdim), dtype=complex)
    for n in range(n_out):
        proj = np.outer(phi[:, n], phi[:, n].conj())
        y = np.zeros((pdim, pdim), dtype=complex)
        y[n + 1, 0] = 1j
        y[0, n + 1] = -1j
        k_pointer += np.kron(proj, y)
    k_pointer *= pointer_completeness * math.pi / (2 * tau_pulse)
    env_root = np.zeros((env_dim, env_dim), dtype=complex)
    env_root[0, 0] = 1.0
    k_pointer_full = np.kron(k_pointer, env_root)

    # cascade generator for env qubit j: pointer-conditioned rotation of
    # |0>_j by +/- pi/4 (outcome sign), Hadamard-basis copy of the outcome
    def cascade_generator(j: int) -> np.ndarray:
        y = np.array([[0, -1j], [1j, 0]], dtype=complex)  # |0> -> cos|0> + sin|1>
        k = np.zeros((dim, dim), dtype=complex)
        for m in range(n_out):
            sign = 1.0 if m % 2 == 0 else -1.0
            sel = np.zeros((pdim, pdim), dtype=complex)
            sel[m + 1, m + 1] = 1.0
            ops = [np.eye(2, dtype=complex)] * d_env
            ops[j - 1] = sign * y
            env_op = ops[0]
            for p in ops[1:]:
                env_op = np.kron(env_op, p)
            k += np.kron(np.kron(i_sys, sel), env_op)
        return (math.pi / (4 * tau_pulse)) * k

    weak_pointer = (omega_weak / omega_int) * k_pointer_full

    if pointer_detuning is None:
        pointer_detuning = 5.0 * omega_weak
    ready_sel = np.zeros((pdim, pdim), dtype=complex)
    ready_sel[0, 0] = 1.0
    detune = pointer_detuning * np.kron(np.kron(i_sys, ready_sel), env_root)

    if pointer_rampdown < 0 or pointer_rampdown >= tau_pulse:
        raise ModelError("pointer_rampdown must be in [0, tau_pulse)")

    h_pulse = h_sys if system_during_cascade else np.zeros_like(h_sys)
    mats = [h_sys + k_pointer_full]
    starts = [0.0]
    t = tau_pulse
    for j in range(1, d_env + 1):
        if j == 1 and pointer_rampdown > 0.0:
            mats.append(h_pulse + cascade_generator(1) + 0.1 * k_pointer_full
                        + weak_pointer + detune)
            starts.append(t)
            mats.append(h_pulse + cascade_generator(1) + weak_pointer + detune)
            starts.append(t + pointer_rampdown)
        else:
            mats.append(h_pulse + cascade_generator(j) + weak_pointer + detune)
            starts.append(t)
        t += tau_pulse
    if dwell_time > 0.0:
        mats.append(h_sys + weak_pointer + detune)
        starts.append(t)
        t += dwell_time
    t_total = t

    model = HamiltonianModel.piecewise(starts, mats, baseline_floor=baseline_floor)

    labels = np.full(dim, -1, dtype=np.int8)
    for node in range(dim):
        pointer = (node // env_dim) % pdim
        if pointer >= 1:
            labels[node] = pointer - 1

    return ApparatusModel(
        system_dim=dsys, n_outcomes=n_out, d_env=d_env,
        omega_int=omega_int, omega_weak=omega_weak, tau_pulse=tau_pulse,
        dwell_time=dwell_time, phi_basis=phi, model=model,
        branch_labels=labels,
        t_first_cascade_end=2 * tau_pulse if d_env >= 1 else tau_pulse,
        t_cascade_end=(1 + d_env) * tau_pulse,
        t_total=t_total,
        pointer_completeness=pointer_completeness)
