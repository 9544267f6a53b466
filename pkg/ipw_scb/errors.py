"""Exception and warning types raised across ipw_scb."""


class IpwScbError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(IpwScbError, IOError):
    """Input file does not follow the delta,x,y schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line {0}: {1}".format(line, message)
        super().__init__(message)
        self.line = line


class ConfigError(IpwScbError, ValueError):
    """Invalid analysis or scenario configuration."""

    def __init__(self, message, keys=()):
        self.detail = message
        if keys:
            message = "{0} (offending keys: {1})".format(message, ", ".join(str(k) for k in keys))
        super().__init__(message)
        self.keys = list(keys)


class FitError(IpwScbError, RuntimeError):
    """Selection model could not be fitted."""


class DegenerateResponseError(FitError):
    pass


class SeparationError(FitError):
    pass


class BandError(IpwScbError, RuntimeError):
    """Estimation or band construction failed."""


class InvalidBandwidthError(BandError, ValueError):
    pass


class DegenerateSupportError(BandError, ValueError):
    pass


class SingularWindowError(BandError):
    """Local design matrix is singular at x."""

    def __init__(self, x, count):
        super().__init__(
            "singular local window at x={0:.6g} ({1} complete cases in window)".format(x, count))
        self.x = x
        self.count = count


class DensityFloorError(BandError):

    def __init__(self, x):
        super().__init__("density estimate is not positive at x={0:.6g}".format(x))
        self.x = x


class CoverageInfeasibleError(BandError):
    """Too many grid points failed for the band to be meaningful."""

    def __init__(self, failed_indices, grid_size):
        super().__init__("{0} of {1} grid points failed".format(len(failed_indices), grid_size))
        self.failed_indices = list(failed_indices)
        self.grid_size = grid_size


class ScenarioError(BandError):

    def __init__(self, failures, replications):
        super().__init__(
            "{0} of {1} replications failed".format(failures, replications))
        self.failures = failures
        self.replications = replications


class BandwidthFallbackWarning(UserWarning):
    pass


class BinCollapseWarning(UserWarning):
    pass


class DiscardedCovariateWarning(UserWarning):
    pass


def exitCode(error):
    """Map an exception to the CLI exit status."""
    if isinstance(error, (SchemaError, ConfigError)):
        return 2
    if isinstance(error, FitError):
        return 3
    if isinstance(error, BandError):
        return 4
    if isinstance(error, ValueError):
        return 2
    return 1
