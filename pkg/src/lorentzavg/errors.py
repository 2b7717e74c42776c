"""Exception hierarchy shared by all modules."""


class LorentzAvgError(Exception):
    """Base class for errors raised by this package."""


class DegenerateMetricError(LorentzAvgError, ValueError):
    """The metric matrix is singular or has the wrong signature."""


class PreconditionError(LorentzAvgError, ValueError):
    """An input violates a documented precondition."""


class AdmissibilityError(PreconditionError):
    """A tangent vector lies on or inside the null cone (eta(y, y) too small)."""


class ConeProximityError(LorentzAvgError, RuntimeError):
    """An integration came too close to the null cone."""


class StiffnessError(LorentzAvgError, RuntimeError):
    """The adaptive integrator could not take a step (step size underflow)."""


class ConfigError(LorentzAvgError, ValueError):
    """Invalid or unknown configuration entry."""


class MomentError(LorentzAvgError, ValueError):
    """Moments could not be formed (e.g. empty support)."""
