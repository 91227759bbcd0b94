"""Variational discrimination of quantum channels, with analytic oracles."""

__version__ = "0.1.0"

from .exceptions import (
    ConfigError,
    ConvergenceError,
    CutoffTooSmallError,
    UsageError,
    ValidationError,
    VqhtError,
)
from .qsim import (
    DensityMatrix,
    KrausChannel,
    Povm,
    apply_channel,
    depolarizing_channel,
    haar_random_unitary,
    naimark_unitary,
    naimark_unitary_multi,
    partial_trace,
    phase_flip_channel,
    random_kraus_channel,
)
from .gaussian import (
    GaussianMoments,
    gaussian_moments_from_circuit,
    illumination_moments,
    mean_photon_moments,
    reduce_moments,
    thermal_moments,
    vacuum_moments,
    vacuum_overlap_gaussian,
)
from .fock import (
    FockState,
    coherent_state,
    illumination_channel,
    reduce_modes,
    tensor_fock,
    thermal_state,
    vacuum_probability,
)
from .oracles import (
    chernoff_bound,
    diamond_phase_flip,
    diamond_unitary,
    epsilon_neighborhood_check,
    helstrom,
    optimal_povm,
    qfi,
    schmidt_values,
    trace_distance,
    uhlmann_fidelity,
    von_neumann_entropy,
)
from .ansatz import (
    ParamCircuit,
    bind_bosonic,
    build_hardware_efficient_ansatz,
    build_illumination_ansatz,
    circuit_unitary,
    fixed_state_circuit,
    ghz_vector,
)
from .optimizers import MaximizeResult, OptimizerConfig, maximize
from .engine import (
    BosonicChannelSpec,
    ConstraintSpec,
    HypothesisProblem,
    OptimizationResult,
    channel_outputs,
    cost_success_multi,
    cost_tve,
    noise_robustness,
    outcome_probabilities,
    probe_state,
    run_vqht,
    signal_occupation,
)
from .serialize import MatrixRecord, load_matrix, save_matrix
from .config import ExperimentConfig, parse_channel_spec, parse_config
from .scenarios import ScenarioResult, execute

__all__ = [
    "__version__",
    "VqhtError",
    "ConfigError",
    "ConvergenceError",
    "CutoffTooSmallError",
    "UsageError",
    "ValidationError",
    "DensityMatrix",
    "KrausChannel",
    "Povm",
    "apply_channel",
    "depolarizing_channel",
    "haar_random_unitary",
    "naimark_unitary",
    "naimark_unitary_multi",
    "partial_trace",
    "phase_flip_channel",
    "random_kraus_channel",
    "GaussianMoments",
    "gaussian_moments_from_circuit",
    "illumination_moments",
    "mean_photon_moments",
    "reduce_moments",
    "thermal_moments",
    "vacuum_moments",
    "vacuum_overlap_gaussian",
    "FockState",
    "coherent_state",
    "illumination_channel",
    "reduce_modes",
    "tensor_fock",
    "thermal_state",
    "vacuum_probability",
    "chernoff_bound",
    "diamond_phase_flip",
    "diamond_unitary",
    "epsilon_neighborhood_check",
    "helstrom",
    "optimal_povm",
    "qfi",
    "schmidt_values",
    "trace_distance",
    "uhlmann_fidelity",
    "von_neumann_entropy",
    "ParamCircuit",
    "bind_bosonic",
    "build_hardware_efficient_ansatz",
    "build_illumination_ansatz",
    "circuit_unitary",
    "fixed_state_circuit",
    "ghz_vector",
    "MaximizeResult",
    "OptimizerConfig",
    "maximize",
    "BosonicChannelSpec",
    "ConstraintSpec",
    "HypothesisProblem",
    "OptimizationResult",
    "channel_outputs",
    "cost_success_multi",
    "cost_tve",
    "noise_robustness",
    "outcome_probabilities",
    "probe_state",
    "run_vqht",
    "signal_occupation",
    "MatrixRecord",
    "load_matrix",
    "save_matrix",
    "ExperimentConfig",
    "parse_channel_spec",
    "parse_config",
    "ScenarioResult",
    "execute",
]
