"""Exception types shared across the workbench."""


class SkytaskError(Exception):
    """Base class for workbench-specific failures."""


class BadRadius(SkytaskError, ValueError):
    """Requested orbit radius does not clear the Earth's surface."""


class ZeroRange(SkytaskError, ValueError):
    """Target position coincides with the sensor site; AER is undefined."""


class SingularState(SkytaskError, ValueError):
    """Propagation state too close to the gravitational singularity."""


class SingularInnovation(SkytaskError, ValueError):
    """Innovation covariance is numerically singular; update would be garbage."""


class NonPositiveTrace(SkytaskError, ValueError):
    """Covariance trace must be positive to take its log."""


class ShapeMismatch(SkytaskError, ValueError):
    """Array argument has the wrong shape for this network."""


class SteppedAfterDone(SkytaskError, RuntimeError):
    """step() called on an episode that already finished."""


class IndexOutOfRange(SkytaskError, IndexError):
    """State or action index outside the table."""


class NonFiniteParameters(SkytaskError, RuntimeError):
    """Network parameters went NaN/inf during training."""
