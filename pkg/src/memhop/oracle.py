"""Exact reference dynamics used as ground truth for the stochastic engine.

Three independent routes compute the evolving jump potentials:
  * ratio route   -- A[n->m](t) = H_nm(t) * psi_m(t)/psi_n(t) with psi from
                     per-slice eigendecomposition (exact per slice);
  * ode route     -- integrate i*hbar*dA/dt = A * sum_p (A_mp - A_np);
  * phase route   -- exponentiate accumulated per-node phase integrals.
The routes must agree on zero-free test states; that agreement is the main
oracle self-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .graph import (PotentialTable, StateGraph, build_graph,
                    regularize_amplitudes)
from .hamiltonian import HamiltonianModel

NORM_TOL = 1e-9
BLOWUP_GUARD = 1e12


class OracleError(RuntimeError):
    pass


class PotentialBlowupError(OracleError):
    def __init__(self, edge, value, t):
        self.edge = edge
        super().__init__(
            f"potential on edge {edge[0]}->{edge[1]} exceeded {BLOWUP_GUARD:g} "
            f"(|A| = {abs(value):.3e} near t = {t:.6g}); some psi_n is passing through 0")


@dataclass
class WaveFunction:
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.amplitudes.copy(), self.time)


@dataclass
class DensityVector:
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.float64)
        if np.any(self.rho < -NORM_TOL):
            raise OracleError(f"negative density entry {self.rho.min():.3e}")
        total = self.rho.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise OracleError(f"density sums to {total}, not 1")


def _propagate_slice(H: HamiltonianModel, s: int, psi: np.ndarray, dt: float,
                     hbar: float = 1.0) -> np.ndarray:
    evals, evecs = H.eig(s)
    phases = np.exp(-1j * evals * dt / hbar)
    return evecs @ (phases * (evecs.conj().T @ psi))


def schrodinger_evolve(H: HamiltonianModel, psi: WaveFunction, t_end: float,
                       hbar: float = 1.0) -> WaveFunction:
    """Evolve psi to t_end via per-slice eigendecompositions (exact per slice)."""
    if t_end < psi.time:
        raise OracleError(f"t_end {t_end} < current time {psi.time}")
    amps = psi.amplitudes.copy()
    t = psi.time
    starts = H.start_times
    s = H.slice_index(t) if t > 0 else 0
    while t < t_end:
        t_next = t_end
        if s + 1 < H.n_slices and starts[s + 1] < t_end:
            t_next = float(starts[s + 1])
        if t_next > t:
            amps = _propagate_slice(H, s, amps, t_next - t, hbar)
        t = t_next
        if s + 1 < H.n_slices and t >= starts[s + 1]:
            s += 1
    out = WaveFunction(amps, t_end)
    if abs(out.norm - 1.0) > NORM_TOL:
        raise OracleError(f"norm drifted to {out.norm} at t = {t_end}")
    return out


def wavefunction_path(H: HamiltonianModel, psi0: np.ndarray, hbar: float = 1.0):
    """Callable t -> amplitudes, exact at arbitrary t (piecewise eigendecomp).

    Precomputes the state at every slice boundary so each evaluation costs a
    single slice propagation.
    """
    psi0 = np.asarray(psi0, dtype=np.complex128)
    boundary_states = [psi0]
    starts = H.start_times
    for s in range(H.n_slices - 1):
        dt = float(starts[s + 1] - starts[s])
        boundary_states.append(_propagate_slice(H, s, boundary_states[s], dt, hbar))

    def path(t: float) -> np.ndarray:
        s = H.slice_index(t)
        return _propagate_slice(H, s, boundary_states[s], t - float(starts[s]), hbar)

    return path


def potentials_from_psi(H: HamiltonianModel, psi: WaveFunction, epsilon_psi: float,
                        graph: StateGraph | None = None) -> PotentialTable:
    """Ratio-route table at psi.time; same floor rule as init_potentials."""
    if graph is None:
        graph = build_graph(H)
    reg = regularize_amplitudes(psi.amplitudes, epsilon_psi)
    h = H.matrix_at(psi.time)
    table = PotentialTable(graph)
    frm, to = graph.directed_from, graph.directed_to
    table.values[:] = h[frm, to] * reg[to] / reg[frm]
    if not np.all(np.isfinite(table.values.view(np.float64))):
        bad = int(np.flatnonzero(~np.isfinite(table.values))[0])
        raise OracleError(f"non-finite potential on edge {frm[bad]}->{to[bad]}")
    return table


def _node_sums(graph: StateGraph, values: np.ndarray) -> np.ndarray:
    """S[k] = sum of potentials on directed edges out of node k (loop included)."""
    sums = np.zeros(graph.node_count, dtype=np.complex128)
    np.add.at(sums, graph.directed_from, values)
    return sums


def potential_ode_evolve(A0: PotentialTable, t_end: float, *,
                         H: HamiltonianModel | None = None,
                         hbar: float = 1.0, rtol: float = 1e-9,
                         atol: float = 1e-12) -> PotentialTable:
    """Integrate i*hbar*dA[n->m]/dt = A[n->m] * (S_m - S_n), S_k = sum_p A[k->p].

    With a time-dependent H the log-derivative term acts as a multiplicative
    jump H(slice+)/H(slice-) on every active directed edge at each slice
    boundary (its distributional meaning for piecewise-constant pulses).
    """
    graph = A0.graph
    frm, to = graph.directed_from, graph.directed_to

    def rhs(t, y):
        sums = _node_sums(graph, y)
        return -1j / hbar * y * (sums[to] - sums[frm])

    def blowup(t, y):
        return float(np.max(np.abs(y)) - BLOWUP_GUARD)

    blowup.terminal = True
    blowup.direction = 1.0

    boundaries: list[float] = []
    if H is not None and H.is_time_dependent:
        boundaries = [float(b) for b in H.start_times[1:] if 0.0 < b < t_end]
    segments = [0.0] + boundaries + [t_end]

    y = A0.values.copy()
    for i in range(len(segments) - 1):
        t0, t1 = segments[i], segments[i + 1]
        if t1 > t0:
            sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=rtol,
                            atol=atol, events=blowup, dense_output=False)
            if not sol.success or (sol.t_events and len(sol.t_events[0])):
                yy = sol.y[:, -1]
                bad = int(np.argmax(np.abs(yy)))
                raise PotentialBlowupError((int(frm[bad]), int(to[bad])),
                                           yy[bad], float(sol.t[-1]))
            y = sol.y[:, -1]
        if i < len(boundaries):
            s_after = H.slice_index(t1)
            h_new = H.slice_matrix(s_after)[frm, to]
            h_old = H.slice_matrix(s_after - 1)[frm, to]
            y = y * (h_new / h_old)
    out = PotentialTable(graph, y, np.zeros(graph.n_directed))
    return out


def accumulated_phase(a_path, t: float, *, rtol: float = 1e-10,
                      atol: float = 1e-12) -> complex:
    """Integral of a complex-valued path over [0, t] by adaptive quadrature."""
    if t == 0.0:
        return 0.0 + 0.0j
    re = quad(lambda u: a_path(u).real, 0.0, t, epsabs=atol, epsrel=rtol, limit=400)[0]
    im = quad(lambda u: a_path(u).imag, 0.0, t, epsabs=atol, epsrel=rtol, limit=400)[0]
    return complex(re, im)


def potentials_via_accumulated_phase(H: HamiltonianModel, psi0: np.ndarray,
                                     epsilon_psi: float, t: float, *,
                                     hbar: float = 1.0,
                                     graph: StateGraph | None = None,
                                     rtol: float = 1e-10) -> PotentialTable:
    """Phase route: A[n->m](t) = A[n->m](0) * exp(-i*Theta_m/hbar + i*Theta_n/hbar)
    with Theta_k(t) = sum_p integral_0^t A[k->p](t') dt' over the exact psi path.
    """
    if graph is None:
        graph = build_graph(H)
    path = wavefunction_path(H, np.asarray(psi0, dtype=np.complex128), hbar)
    reg0 = regularize_amplitudes(psi0, epsilon_psi)
    frm, to = graph.directed_from, graph.directed_to

    def node_sum_path(k: int):
        # S_k(t) = (H(t) psi(t))_k / psi_k(t), with psi_k floored like t=0
        def f(u: float) -> complex:
            amps = path(u)
            reg = regularize_amplitudes(amps / np.linalg.norm(amps), epsilon_psi)
            h = H.matrix_at(u)
            row = h[k, :]
            mask = np.abs(row) > 0
            return complex(np.sum(row[mask] * reg[mask] / reg[k]))
        return f

    thetas = np.array([accumulated_phase(node_sum_path(k), t, rtol=rtol)
                       for k in range(graph.node_count)])
    a0 = H.slice_matrix(0)[frm, to] * reg0[to] / reg0[frm]
    values = a0 * np.exp(-1j * (thetas[to] - thetas[frm]) / hbar)
    if H.is_time_dependent:
        h_now = H.matrix_at(t)[frm, to]
        h_0 = H.slice_matrix(0)[frm, to]
        values = values * (h_now / h_0)
    return PotentialTable(graph, values, np.zeros(graph.n_directed))


def master_equation_evolve(H: HamiltonianModel, psi_path, rho0: DensityVector,
                           t_end: float, *, hbar: float = 1.0, hbar2: float = 1e-2,
                           epsilon_psi: float = 1e-12, rtol: float = 1e-10,
                           atol: float = 1e-12) -> DensityVector:
    """Integrate d(rho_n)/dt = sum_m (T[m->n] rho_m - T[n->m] rho_n).

    Rates come from the jump-rate law with potentials built from the exact
    psi(t); the hbar2 contributions cancel in the net flux, so the result is
    hbar2-independent (a property the test suite checks rather than assumes).
    psi_path is a callable t -> amplitudes, e.g. from wavefunction_path.
    """
    graph = build_graph(H)
    frm, to = graph.directed_from, graph.directed_to

    def rates_at(t: float) -> np.ndarray:
        amps = psi_path(t)
        reg = regularize_amplitudes(amps / np.linalg.norm(amps), epsilon_psi)
        h = H.matrix_at(t)
        a = h[frm, to] * reg[to] / reg[frm]
        return -a.imag / hbar + np.abs(a) / hbar2

    def rhs(t, rho):
        rates = rates_at(t)
        flux = rates * rho[frm]
        out = np.zeros_like(rho)
        np.add.at(out, to, flux)
        np.add.at(out, frm, -flux)
        return out

    sol = solve_ivp(rhs, (0.0, t_end), rho0.rho, method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise OracleError(f"master-equation integration failed: {sol.message}")
    rho = sol.y[:, -1]
    if rho.min() < -1e-9:
        raise OracleError(f"density went negative ({rho.min():.3e})")
    rho = np.clip(rho, 0.0, None)
    return DensityVector(rho)


def zero_free_margin(H: HamiltonianModel, psi0: np.ndarray, t_end: float,
                     n_grid: int = 400, hbar: float = 1.0) -> float:
    """min over a time grid of min_n |psi_n(t)|; used to screen test states."""
    path = wavefunction_path(H, psi0, hbar)
    lo = np.inf
    for t in np.linspace(0.0, t_end, n_grid):
        lo = min(lo, float(np.min(np.abs(path(t)))))
    return lo
