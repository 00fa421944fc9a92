"""Bayesian drift estimation for discretely observed ergodic diffusions.

The package covers the full workflow: declare a drift coefficient with its
regularity constants, simulate low-frequency observations, evaluate
transition densities and operators, build a discrete covering-net prior,
compute exact posteriors over its support, and measure how posterior mass
concentrates around the data-generating drift.
"""

from .drift import (
    DiagnosticsWarning,
    DriftClassError,
    DriftEvaluationError,
    DriftSpec,
    Dissipativity,
    OUForm,
    Parametric1DForm,
    PotentialForm,
    PotentialSpec,
    StationaryLaw,
    TabulatedForm,
    ValidationReport,
    Violation,
    default_half_width,
    ou_spec,
    potential_from_profile,
    register_parametric_1d,
    register_potential_profile,
    sample_stationary,
    scale_function,
    scaled_identity_profile,
    sqrt_blend_profile,
    stationary_density_1d,
    stationary_density_potential,
    validate_drift,
)
from .quadrature import QuadratureConfig, QuadratureError
from .transition import (
    IdentifiabilityReport,
    MCValue,
    PrecisionWarning,
    SmallDeltaReport,
    TestFunction,
    TopologyProbe,
    TransitionModel,
    euler_gaussian_log_density,
    exact_ou_log_density,
    girsanov_log_weights,
    identifiability_probe,
    partition_gap_diagnostic,
    probe_from_csv,
    probe_to_csv,
    small_delta_check,
    test_function,
    transition_density,
    transition_operator,
    uniform_probe,
    weak_distance,
)
from .simulate import (
    ExplosionError,
    IngestError,
    IngestReport,
    ObservationSeries,
    SimScheme,
    brownian_bundle,
    euler_endpoints,
    exact_linear_step,
    ingest_csv,
    read_series_csv,
    simulate_series,
)
from .divergence import (
    DivergenceReport,
    batch_divergence,
    divergence_report,
    kl_invariant,
    kl_path,
    kl_path_mc,
    kl_transition,
    kl_transition_exact_linear,
    l2_mu_distance,
)
from .prior import (
    BallMassReport,
    CapacityError,
    FamilyConstants,
    FunctionFamily,
    PriorNet,
    audit_covering,
    audit_family,
    build_net,
    linear_family,
    prior_ball_mass,
    sqrt_blend_family,
    sup_metric,
    tail_truncation_bound,
)
from .posterior import (
    ConsistencyCurve,
    L2Ball,
    PosteriorResult,
    SqrtLikelihoodReport,
    WeakNeighborhood,
    compute_posterior,
    consistency_curve,
    likelihood_mean_one_check,
    log_likelihood_ratio,
    neighborhood_complement_mass,
    sqrt_likelihood_curve,
)

__version__ = "0.1.0"

# the command line reads __version__, so this import must come last
from .cli import ConfigError, run_command  # noqa: E402
