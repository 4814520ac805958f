"""Self-stabilizing phase measurements on a continuously monitored qubit.

The package simulates a qubit acquiring an unknown phase while being
weakly measured, decohering, and stabilized by rapid-purification feedback
in a rotating frame whose frequency is re-estimated every block by a
grid-based Bayesian filter driven by the measurement record.

Units: all rates (measurement strength kappa, decoherence gamma, phase phi)
share one inverse-time unit; the convention throughout the docs and default
configs is kappa = 1.
"""

__version__ = "0.1.0"

from .core import (
    AllZeroLikelihoodError,
    DegenerateBoundError,
    NoiseModel,
    NonPhysicalDriftError,
    NonPhysicalStateError,
    PauliAxis,
    QubitState,
    StabqubitError,
    bloch_to_state,
    cramer_rao_bound,
    dissipator,
    innovation_term,
    linear_entropy,
    purity,
    qfi,
)
from .engine import (
    MeasurementOp,
    SimConfig,
    TrajectoryRecord,
    ValidationError,
    default_dt,
    derive_rng,
    mean_evolution,
    simulate_block,
    simulate_block_tracking,
    step,
)
from .feedback import AxisChoice, MeasurementSchedule, plan_block, purification_axis
from .filtering import (
    HypothesisBank,
    PhaseEstimate,
    PhaseGrid,
    assimilate,
    assimilate_record,
    estimate,
    init_bank,
    mean_state,
    posterior,
)
from .kernels import backend as kernel_backend
from .protocol import (
    EnsembleSummary,
    ProtocolConfig,
    ProtocolResult,
    run,
    run_ensemble,
)

__all__ = [
    "__version__",
    "kernel_backend",
    # core
    "StabqubitError",
    "NonPhysicalStateError",
    "NonPhysicalDriftError",
    "DegenerateBoundError",
    "AllZeroLikelihoodError",
    "QubitState",
    "PauliAxis",
    "NoiseModel",
    "bloch_to_state",
    "dissipator",
    "innovation_term",
    "linear_entropy",
    "purity",
    "qfi",
    "cramer_rao_bound",
    # engine
    "MeasurementOp",
    "SimConfig",
    "TrajectoryRecord",
    "ValidationError",
    "default_dt",
    "derive_rng",
    "step",
    "simulate_block",
    "simulate_block_tracking",
    "mean_evolution",
    # feedback
    "AxisChoice",
    "MeasurementSchedule",
    "purification_axis",
    "plan_block",
    # filtering
    "PhaseGrid",
    "HypothesisBank",
    "PhaseEstimate",
    "init_bank",
    "assimilate",
    "assimilate_record",
    "posterior",
    "estimate",
    "mean_state",
    # protocol
    "ProtocolConfig",
    "ProtocolResult",
    "EnsembleSummary",
    "run",
    "run_ensemble",
]
