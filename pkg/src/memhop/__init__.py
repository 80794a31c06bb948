"""memhop: a non-Markovian jump-process simulator on discrete state graphs.

A single trajectory hops between graph nodes with rates set by complex
per-edge jump potentials; every jump rewrites the two potentials of the
traversed edge with phase factors accumulated from the time since the last
same-direction jump. As the rate constant hbar2 goes to zero the ensemble
statistics reproduce Schrodinger evolution generated by the Hamiltonian
that seeded the potentials; at finite hbar2 the model predicts measurable
deviations, which the experiment drivers quantify.
"""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED, backend_name
from .engine import (EngineConfig, EventLog, JumpEvent, PhysicalConstants,
                     TrajectoryState, apply_jump, evolve_trajectory,
                     jump_rates, recurrence_intervals, sample_next_jump)
from .ensemble import (EnsembleConfig, EnsembleResult, cat_state_sweep,
                       equivariance_distance, measurement_statistics,
                       recurrence_scaling_fit, run_ensemble)
from .graph import (DirectedEdge, PotentialTable, StateGraph, build_graph,
                    init_potentials, regularize_amplitudes)
from .hamiltonian import HamiltonianModel
from .models import (ApparatusModel, GateSchedule, QubitRegister,
                     cat_state_circuit, complete_graph, measurement_apparatus,
                     ring, total_spin, two_level)
from .oracle import (DensityVector, WaveFunction, accumulated_phase,
                     master_equation_evolve, potential_ode_evolve,
                     potentials_from_psi, schrodinger_evolve)

__all__ = [
    "__version__", "NUMBA_ENABLED", "backend_name",
    "EngineConfig", "EventLog", "JumpEvent", "PhysicalConstants",
    "TrajectoryState", "apply_jump", "evolve_trajectory", "jump_rates",
    "recurrence_intervals", "sample_next_jump",
    "EnsembleConfig", "EnsembleResult", "cat_state_sweep",
    "equivariance_distance", "measurement_statistics",
    "recurrence_scaling_fit", "run_ensemble",
    "DirectedEdge", "PotentialTable", "StateGraph", "build_graph",
    "init_potentials", "regularize_amplitudes",
    "HamiltonianModel",
    "ApparatusModel", "GateSchedule", "QubitRegister", "cat_state_circuit",
    "complete_graph", "measurement_apparatus", "ring", "total_spin",
    "two_level",
    "DensityVector", "WaveFunction", "accumulated_phase",
    "master_equation_evolve", "potential_ode_evolve", "potentials_from_psi",
    "schrodinger_evolve",
]
