import numpy as np
import pytest
from scipy.integrate import solve_ivp

from memhop.graph import build_graph, init_potentials, regularize_amplitudes
from memhop.hamiltonian import HamiltonianModel
from memhop.models import random_hermitian, random_state, two_level
from memhop.oracle import (DensityVector, OracleError, PotentialBlowupError,
                           WaveFunction, accumulated_phase,
                           master_equation_evolve, potential_ode_evolve,
                           potentials_from_psi,
                           potentials_via_accumulated_phase,
                           schrodinger_evolve, wavefunction_path,
                           zero_free_margin)

from conftest import assert_rel_close


class TestSchrodinger:
    def test_two_level_rabi(self):
        g = 1.0
        H = two_level(g)
        psi = WaveFunction(np.array([1.0, 0.0]))
        for t in (0.3, 1.0, np.pi / 2):
            out = schrodinger_evolve(H, psi, t)
            expected = np.array([np.cos(g * t), -1j * np.sin(g * t)])
            assert_rel_close(out.amplitudes, expected, 1e-12)
        half_pi = schrodinger_evolve(H, psi, np.pi / (2 * g))
        assert abs(half_pi.probabilities[1] - 1.0) < 1e-12

    def test_identity_when_t_unchanged(self):
        H = random_hermitian(3, 1)
        psi = WaveFunction(random_state(3, 2), time=0.7)
        out = schrodinger_evolve(H, psi, 0.7)
        assert np.array_equal(out.amplitudes, psi.amplitudes)

    def test_against_independent_integrator(self):
        H = random_hermitian(5, 21)
        psi0 = random_state(5, 22)
        h = H.slice_matrix(0)

        def rhs(t, y):
            return -1j * (h @ y)

        sol = solve_ivp(rhs, (0.0, 1.0), psi0.astype(complex), method="DOP853",
                        rtol=1e-12, atol=1e-14)
        ours = schrodinger_evolve(H, WaveFunction(psi0), 1.0)
        assert np.max(np.abs(ours.amplitudes - sol.y[:, -1])) < 1e-8

    def test_norm_preserved_across_slices(self):
        h1 = random_hermitian(3, 4).slice_matrix(0)
        h2 = random_hermitian(3, 5).slice_matrix(0)
        H = HamiltonianModel.piecewise([0.0, 0.5], [h1, h2])
        out = schrodinger_evolve(H, WaveFunction(random_state(3, 6)), 2.0)
        assert abs(out.norm - 1.0) < 1e-9

    def test_backwards_rejected(self):
        with pytest.raises(OracleError):
            schrodinger_evolve(two_level(), WaveFunction(np.array([1, 0]), 1.0), 0.5)


class TestPotentialsFromPsi:
    def test_equal_superposition(self):
        g = 1.3
        table = potentials_from_psi(two_level(g),
                                    WaveFunction(np.array([1, 1]) / np.sqrt(2)),
                                    1e-6)
        assert table.get(0, 1) == pytest.approx(g)
        assert table.get(1, 0) == pytest.approx(g)

    def test_rabi_tangent(self):
        g = 1.0
        H = two_level(g)
        for t in (0.4, 1.0, 1.4):
            psi = schrodinger_evolve(H, WaveFunction(np.array([1.0, 0])), t)
            table = potentials_from_psi(H, psi, 1e-12)
            assert_rel_close(table.get(0, 1), -1j * g * np.tan(g * t), 1e-10)

    def test_hermitian_identity(self):
        H = random_hermitian(4, 31)
        psi = WaveFunction(random_state(4, 32))
        eps = 1e-9
        reg = regularize_amplitudes(psi.amplitudes, eps)
        table = potentials_from_psi(H, psi, eps)
        for n, m in table.graph.edges:
            assert_rel_close(np.conj(table.get(n, m)) * abs(reg[n]) ** 2,
                             table.get(m, n) * abs(reg[m]) ** 2, 1e-12)


class TestPotentialOde:
    def test_symmetric_stationary(self):
        # equal real potentials on a symmetric 2-node model: S_m - S_n = 0
        H = two_level(1.0)
        table = init_potentials(H, np.array([1, 1]) / np.sqrt(2), 1e-6)
        out = potential_ode_evolve(table, 3.0)
        assert_rel_close(out.values, table.values, 1e-9)

    def test_rabi_matches_tangent_before_pole(self):
        g = 1.0
        H = two_level(g)
        eps = 1e-8
        table = init_potentials(H, np.array([1.0, 0]), eps)
        t = 1.2  # pole at pi/2 ~ 1.5708
        out = potential_ode_evolve(table, t, rtol=1e-11, atol=1e-14)
        assert_rel_close(out.get(0, 1), -1j * g * np.tan(g * t), 1e-6)

    def test_blowup_guard_names_edge(self):
        # the amplitude floor keeps |A| <= ~1/eps^2 on the two-level model, so
        # trip the guard with a hand-crafted asymmetric table whose magnitudes
        # grow without bound (the exact-zero-crossing scenario)
        H = two_level(1.0)
        table = init_potentials(H, np.array([1.0, 0]), 1e-3)
        table.set(0, 1, 9e11)
        table.set(1, 0, 9e11j)
        with pytest.raises(PotentialBlowupError, match="exceeded") as err:
            potential_ode_evolve(table, 1.0)
        assert err.value.edge in {(0, 1), (1, 0)}

    def test_route_consistency_random_models(self, zero_free_models):
        H, psi0 = zero_free_models[1]
        eps = 1e-9
        graph = build_graph(H)
        table0 = init_potentials(H, psi0, eps, graph)
        t = 2.0
        psi_t = WaveFunction(wavefunction_path(H, psi0)(t), t)
        ratio = potentials_from_psi(H, psi_t, eps, graph)
        ode = potential_ode_evolve(table0, t, H=H, rtol=1e-11, atol=1e-13)
        assert_rel_close(ode.values, ratio.values, 1e-6)


class TestMasterEquation:
    def test_equivariance_three_node(self):
        H = random_hermitian(3, 41)
        psi0 = random_state(3, 42)
        path = wavefunction_path(H, psi0)
        rho0 = DensityVector(np.abs(psi0) ** 2)
        for hbar2 in (0.05, 0.2):
            rho = master_equation_evolve(H, path, rho0, 2.0, hbar2=hbar2)
            target = np.abs(path(2.0)) ** 2
            assert np.max(np.abs(rho.rho - target)) < 1e-6

    def test_uniform_stays_uniform_on_symmetric_model(self):
        n = 4
        h = np.full((n, n), 1.0, dtype=complex)
        np.fill_diagonal(h, 0)
        H = HamiltonianModel.constant(h)
        psi0 = np.full(n, 1 / np.sqrt(n), dtype=complex)
        path = wavefunction_path(H, psi0)
        rho = master_equation_evolve(H, path, DensityVector(np.full(n, 1 / n)),
                                     1.5, hbar2=0.1)
        assert np.max(np.abs(rho.rho - 1 / n)) < 1e-9

    def test_probability_conserved(self):
        H = random_hermitian(4, 43)
        psi0 = random_state(4, 44)
        path = wavefunction_path(H, psi0)
        rho0 = np.abs(random_state(4, 45)) ** 2
        rho0 /= rho0.sum()
        rho = master_equation_evolve(H, path, DensityVector(rho0), 1.0,
                                     hbar2=0.1)
        assert abs(rho.rho.sum() - 1.0) < 1e-9

    def test_density_validation(self):
        with pytest.raises(OracleError):
            DensityVector(np.array([0.5, 0.6]))
        with pytest.raises(OracleError):
            DensityVector(np.array([1.2, -0.2]))


class TestAccumulatedPhase:
    def test_constant_path(self):
        c = 0.3 - 0.7j
        out = accumulated_phase(lambda t: c, 2.5)
        assert_rel_close(out, c * 2.5, 1e-12)

    def test_linearity_under_negation(self):
        f = lambda t: np.exp(1j * t) * (1 + 0.5 * t)
        s = accumulated_phase(f, 1.7)
        s_neg = accumulated_phase(lambda t: -f(t), 1.7)
        assert_rel_close(s + s_neg, 0.0 + 0j, 1e-12, "negated path")

    def test_phase_route_matches_ratio_route(self):
        H = random_hermitian(3, 51, diagonal=False)
        psi0 = random_state(3, 52)
        assert zero_free_margin(H, psi0, 2.0) > 0.05
        eps = 1e-9
        graph = build_graph(H)
        t = 2.0
        psi_t = WaveFunction(wavefunction_path(H, psi0)(t), t)
        ratio = potentials_from_psi(H, psi_t, eps, graph)
        phase = potentials_via_accumulated_phase(H, psi0, eps, t, graph=graph)
        assert_rel_close(phase.values, ratio.values, 1e-6)


class TestTimeDependentExtension:
    def test_slice_boundary_ratio_jump(self):
        # piecewise-constant H: the ODE route with boundary ratio jumps must
        # match the ratio route under the time-dependent Schrodinger evolution
        rng = np.random.default_rng(61)
        h1 = random_hermitian(3, 62).slice_matrix(0).copy()
        # second slice: same sparsity, rescaled couplings (keeps ratios finite)
        scale = rng.uniform(0.5, 1.5, size=(3, 3))
        scale = (scale + scale.T) / 2
        h2 = h1 * scale
        H = HamiltonianModel.piecewise([0.0, 0.8], [h1, h2])
        psi0 = random_state(3, 66)
        assert zero_free_margin(H, psi0, 2.0) > 0.1
        eps = 1e-9
        graph = build_graph(H)
        table0 = init_potentials(H, psi0, eps, graph)
        t = 1.6
        ode = potential_ode_evolve(table0, t, H=H, rtol=1e-11, atol=1e-13)
        psi_t = WaveFunction(wavefunction_path(H, psi0)(t), t)
        ratio = potentials_from_psi(H, psi_t, eps, graph)
        assert_rel_close(ode.values, ratio.values, 1e-6)
