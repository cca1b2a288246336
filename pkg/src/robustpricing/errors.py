"""Exception types shared across the package."""


class PricingError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PricingError, ValueError):
    """Invalid or inconsistent problem data (shape mismatches, bad values)."""


class ConfigError(PricingError, ValueError):
    """Invalid configuration object or configuration file."""


class CapabilityError(PricingError, RuntimeError):
    """The requested solver mode cannot handle the given problem structure."""


class NoFeasibleSolutionError(PricingError, RuntimeError):
    """No price assignment satisfies the side constraints."""


class MetricUndefinedError(PricingError, ValueError):
    """A metric (e.g. AUC) is undefined for the given labels."""


class SolveTimeout(PricingError, RuntimeError):
    """Time limit exceeded; carries the best solution found so far, if any."""

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent
