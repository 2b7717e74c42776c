"""Lorentz connection, its fiber average, and trajectory-divergence checks."""

from .averaging import (
    AveragedConnectionField,
    DifferenceReport,
    averaged_gamma,
    connection_difference,
    connection_distance,
    convex_interpolate,
    correction_tensors,
    delta_tensor,
    distance_bound,
    distance_bound_value,
)
from .connections import (
    AffineConnection,
    LorentzConnection,
    TangentState,
    TildeConnection,
    decompose_LT,
    lorentz_gamma,
    nonlinear_connection,
    spray_at,
    tilde_gamma,
)
from .dynamics import Trajectory, constraint_drift, integrate_autoparallel, integrate_lorentz, reparameterize
from .errors import (
    AdmissibilityError,
    ConeProximityError,
    ConfigError,
    DegenerateMetricError,
    LorentzAvgError,
    MomentError,
    PreconditionError,
    StiffnessError,
)
from .fields import Potential, faraday_at, gauge_transform, preset_field
from .geometry import (
    MetricField,
    christoffel_at,
    eta_bar_at,
    eta_bar_norm,
    minkowski,
    operator_norm,
    randers_function,
)
from .harness import (
    ComparisonReport,
    check_hypotheses,
    position_bound,
    run_comparison,
    scaling_study,
    t_max_estimate,
    velocity_bound,
)
from .kinetics import (
    Ensemble,
    HyperboloidDistribution,
    MomentSet,
    energy,
    hyperboloid_lift,
    moments,
    sample_ensemble,
    support_diameter,
    transport_ensemble,
    volume_density,
)

__version__ = "0.1.0"
