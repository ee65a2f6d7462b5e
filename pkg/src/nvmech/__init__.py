"""Simulation toolkit for oscillator-mediated nuclear-spin entanglement in
driven defect-center arrays: exact and effective Hamiltonians, unitary /
Lindblad / stochastic propagation, pulse sequences, and experiment runners."""

__version__ = "0.1.0"

from .numerics import (  # noqa: F401
    POLICY,
    CapacityError,
    ConvergenceError,
    DensityMatrix,
    Operator,
    StateVector,
)
from .model import (  # noqa: F401
    CouplingMatrix,
    HilbertLayout,
    SystemParams,
    build_effective_hamiltonian,
    build_exact_hamiltonian,
    build_graph_hamiltonian,
    build_polaron_hamiltonian,
    build_sw_hamiltonian,
    coupling_constants,
    polaron_unitary,
    schrieffer_wolff_unitary,
)
from .noise import NoiseParams, NoiseProcess, calibrate_strength  # noqa: F401
from .dynamics import (  # noqa: F401
    EvolutionResult,
    LindbladSpec,
    PulseSchedule,
    cpmg_schedule,
    ensemble_average,
    evolve_lindblad,
    evolve_noisy,
    evolve_unitary,
    periodic_schedule,
)
from .observables import (  # noqa: F401
    GraphSpec,
    TargetState,
    bell_target,
    fidelity_curve,
    ghz_state,
    graph_state,
    pulsed_graph_target,
)
