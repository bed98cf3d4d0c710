"""Exception hierarchy.

Errors split into two families because the CLI maps them to different exit
codes: malformed input (``InvalidParameterError``) versus a well-formed model
whose equilibrium construction does not apply (``ModelPreconditionError``).
"""


class ModelError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(ModelError, ValueError):
    """A numeric argument is outside its admissible range."""


class ModelPreconditionError(ModelError):
    """The parameters are valid but the requested construction does not apply."""


class DegenerateDemandError(ModelPreconditionError):
    """Demand is zero with certainty, so reservation prices are undefined."""


class WrongVariantError(ModelPreconditionError):
    """The requested equilibrium constructor does not match the demand kind or seller count."""


class ConditionsViolatedError(ModelPreconditionError):
    """A sufficient condition for a mixed equilibrium fails (e.g. q_1 = 0)."""


class NoFixedPointError(ModelPreconditionError):
    """Infinite-horizon value requested with discount 1."""


class InternalConsistencyError(ModelError, RuntimeError):
    """A numerical invariant that should hold by construction was violated."""
