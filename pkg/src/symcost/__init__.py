"""Numerical checks of the symmetry / irreversibility / coherence trade-off
for finite-dimensional quantum channels, with application harnesses for
thermodynamics, information scrambling, measurements, gates, and covariant
codes."""

from .channels import (
    Implementation,
    KrausChannel,
    MeasurementChannel,
    apply,
    channel_of,
    compose,
    conservation_defect,
    dephasing_channel,
    dual_apply,
    erasure_noise_channel,
    identity_channel,
    is_covariant,
    measurement_channel,
    unitary_channel,
)
from .fisher import qfi_limit_check, sld_qfi, variance
from .linalg import TensorFactorization, commutator, kron, operator_norm, partial_trace, trace_norm
from .recovery import (
    entanglement_fidelity_errors,
    helstrom_measurement,
    optimize_recovery,
    recovery_error,
)
from .states import (
    DensityMatrix,
    TestEnsemble,
    fidelity,
    gibbs_state,
    haar_random_pure,
    maximally_entangled,
    purified_distance,
    relative_entropy,
    trace_distance,
    von_neumann_entropy,
)
from .tradeoff import (
    CostBound,
    TradeoffReport,
    TradeoffViolation,
    charge_change_operator,
    check_entropy_production_bound,
    check_tradeoff_inequality,
    check_uncertainty_relation,
    coherence_cost_lower_bound,
    coherence_numerator,
    fluctuation_denominator_direct,
    fluctuation_denominator_dual,
    fluctuation_denominator_split,
    fluctuation_denominator_spread,
    generalized_entropy_production,
    entropy_production_beta,
    operator_conversion_bound,
    petz_error,
    petz_map,
)

__version__ = "0.1.0"
