"""Exception hierarchy for csmci.

Every error raised on a contract violation derives from :class:`CsmciError`
so callers can catch library failures without masking programming errors.
"""


class CsmciError(Exception):
    """Base class for all csmci errors."""


class InvalidDimensionError(CsmciError, ValueError):
    """Lattice constructor called with an unsupported dimension."""


class InvalidRegionError(CsmciError, ValueError):
    """Region is not a valid vertex subset of the owning graph."""


class UnsupportedTemplateError(CsmciError, ValueError):
    """Sum-region template not defined for this graph or target arity."""


class UnsupportedAlphabetError(CsmciError, ValueError):
    """Sample space not supported (e.g. continuous or empty)."""


class ConfigurationError(CsmciError, ValueError):
    """Spin configuration does not match the graph/region it is used with."""


class EnumerationLimitError(CsmciError):
    """Exhaustive summation requested above the enumeration cap."""


class EmptySampleError(CsmciError, ValueError):
    """An estimator was handed an empty sample set."""


class TraceMismatchError(CsmciError, ValueError):
    """Component traces do not share a common sample count."""


class InsufficientSamplesError(CsmciError, ValueError):
    """Too few sample points for the requested covariance estimate."""


class SingularCovarianceError(CsmciError):
    """Covariance matrix cannot be inverted even after conditioning."""


class IncompleteMomentsError(CsmciError, ValueError):
    """Gradient evaluation is missing a vertex or edge moment estimate."""


class GraphMismatchError(CsmciError, ValueError):
    """Two parameter sets do not live on the same graph."""


class TrainingDivergedError(CsmciError, RuntimeError):
    """Gradient ascent produced parameters beyond the divergence guard."""


class ExperimentConfigError(CsmciError, ValueError):
    """Experiment configuration failed validation."""
