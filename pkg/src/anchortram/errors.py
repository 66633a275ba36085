"""Exception types shared across the package.

The CLI maps each class to a distinct exit code, so keep the hierarchy flat
and the meanings disjoint.
"""


class AnchorTramError(Exception):
    """Base class for errors raised by this package."""


class DataFormatError(AnchorTramError):
    """Malformed data file or inconsistent dataset arrays."""


class ModelSpecError(AnchorTramError):
    """Invalid or internally inconsistent model specification."""


class ScenarioError(AnchorTramError):
    """Unknown simulation scenario or out-of-range scenario knob."""


class DegenerateProjectionError(AnchorTramError):
    """Too few rows to build an anchor projection."""


class InfeasibleLikelihoodError(AnchorTramError):
    """Likelihood undefined at the supplied parameters, e.g. a non-positive
    transformation derivative at an exact observation or a numerically
    degenerate interval."""


class UnsupportedMetricError(AnchorTramError):
    """Metric not defined for the given model type."""
