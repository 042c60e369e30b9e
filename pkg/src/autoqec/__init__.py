"""autoqec: autonomous bit-flip error correction by reservoir engineering.

A simulation library and CLI for dissipative stabilisation of repetition-code
logical qubits: model builders at several levels of approximation, master
equation and quantum-trajectory propagators, Liouvillian spectral analysis,
and classical basin classification of the engineered jump dynamics.
"""

from .hilbert import (
    DensityMatrix,
    Operator,
    PureState,
    TensorSpace,
    annihilator,
    apply_dissipator,
    embed,
    make_space,
    partial_trace,
    pauli,
    projector,
)
from .models import (
    Channel,
    LindbladModel,
    Params,
    build_effective_3q,
    build_single_cavity_3q,
    build_star_effective,
    build_star_multiplexed,
    build_tierB_3q,
    build_tierC_3q,
    build_unprotected_qubit,
    gamma_c,
    validate_timescales,
)
from .integrator import (
    GapResult,
    Observable,
    PropagationConfig,
    TimeSeries,
    TrajectoryConfig,
    liouvillian_gap,
    propagate_master,
    propagate_trajectories,
)
from .analysis import (
    BasinReport,
    classify_basins,
    codespace_projector,
    correction_order_sweep,
    distance_to_codespace,
    fidelity,
    fit_decay_rate,
    logical_coherence,
)

__version__ = "0.1.0"
