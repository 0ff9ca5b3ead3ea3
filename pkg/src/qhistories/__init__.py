"""Finite-dimensional consistent-histories quantum mechanics.

Properties are projectors; frameworks are projective decompositions of the
identity; histories chain properties over a time grid and earn
probabilities only when their family passes the consistency test.  On top
of that core sit a unitary measurement model, information-bound
experiments, and a deterministic scenario runner.
"""

from ._version import __version__
from . import errors
from .linalg import (
    DEFAULT_TOLERANCES,
    STRICT_TOLERANCES,
    EigenSystem,
    Tolerances,
    complete_to_unitary,
    hermitian_eigendecomposition,
    tensor_product,
    unitary_from_hamiltonian,
)
from .properties import (
    DecompositionOfIdentity,
    ObservableSpectrum,
    Projector,
    common_refinement,
    commutator_norm,
    compatible,
    conjunction,
    disjunction,
    event_algebra,
    identity_projector,
    make_projector,
    negation,
    observable_to_pdi,
    validate_pdi,
    zero_projector,
)
from .histories import (
    ConsistencyReport,
    EventSlot,
    History,
    HistoryFamily,
    InitialCondition,
    ProbabilityTable,
    assign_probabilities,
    build_family,
    chain_ket,
    chain_operator,
    conditional_probability,
    consistency_check,
    event_probability,
    marginal_distribution,
)
from .measurement import (
    MeasurementModel,
    PointerDistribution,
    build_measurement_model,
    evolved_state,
    family_pointer,
    family_retrodiction,
    family_unitary,
    pointer_pdi,
    pointer_probabilities_trace,
    pointer_projector,
    refine_by_pointer,
    retrodict,
    system_projector,
)
from .info import (
    ChannelReport,
    DenseCodingReport,
    Ensemble,
    bell_basis_pdi,
    channel_experiment,
    dense_coding_demo,
    holevo_chi,
    make_ensemble,
    mutual_information,
    shannon_entropy,
    von_neumann_entropy,
)
from .scenario import Report, Scenario, parse_scenario, render_report, run_scenario

__all__ = [
    "__version__",
    "errors",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "STRICT_TOLERANCES",
    "EigenSystem",
    "tensor_product",
    "hermitian_eigendecomposition",
    "unitary_from_hamiltonian",
    "complete_to_unitary",
    "Projector",
    "DecompositionOfIdentity",
    "ObservableSpectrum",
    "make_projector",
    "identity_projector",
    "zero_projector",
    "observable_to_pdi",
    "validate_pdi",
    "negation",
    "conjunction",
    "disjunction",
    "commutator_norm",
    "compatible",
    "common_refinement",
    "event_algebra",
    "InitialCondition",
    "History",
    "EventSlot",
    "HistoryFamily",
    "ConsistencyReport",
    "ProbabilityTable",
    "build_family",
    "chain_ket",
    "chain_operator",
    "consistency_check",
    "assign_probabilities",
    "event_probability",
    "marginal_distribution",
    "conditional_probability",
    "MeasurementModel",
    "PointerDistribution",
    "build_measurement_model",
    "evolved_state",
    "pointer_projector",
    "system_projector",
    "pointer_pdi",
    "family_unitary",
    "family_pointer",
    "family_retrodiction",
    "pointer_probabilities_trace",
    "retrodict",
    "refine_by_pointer",
    "Ensemble",
    "ChannelReport",
    "DenseCodingReport",
    "shannon_entropy",
    "mutual_information",
    "von_neumann_entropy",
    "holevo_chi",
    "make_ensemble",
    "channel_experiment",
    "bell_basis_pdi",
    "dense_coding_demo",
    "Scenario",
    "Report",
    "parse_scenario",
    "run_scenario",
    "render_report",
]
