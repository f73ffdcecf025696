"""Exception types shared across the toolkit."""


class BurstSdeError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(BurstSdeError, ValueError):
    """Invalid model or configuration parameters."""


class DomainError(BurstSdeError, ValueError):
    """Function evaluated outside its mathematical domain."""


class NumericalError(BurstSdeError, RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""


class SimulationTruncated(NumericalError):
    """The stop condition was not reached within the hard step cap."""
