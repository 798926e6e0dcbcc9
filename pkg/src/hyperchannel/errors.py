"""Exception hierarchy shared across the package."""


class HyperchannelError(Exception):
    """Base class for all package errors."""


class ConfigError(HyperchannelError, ValueError):
    """Invalid configuration content (unknown key, bad type, constraint)."""


class DomainError(HyperchannelError, ValueError):
    """Input outside the mathematical domain of an operation."""


class RegimeError(DomainError):
    """Input outside the physical validity regime of a formula."""


class DegenerateChannelError(HyperchannelError):
    """Channel potential has no confining minimum at the channel centre."""


class NoPeakError(HyperchannelError, ValueError):
    """Profile has no peak rising above its baseline."""


class MergeError(HyperchannelError, ValueError):
    """Histograms with incompatible metadata cannot be merged."""


class MissingDataError(HyperchannelError):
    """An output bundle lacks the scans a figure export needs."""


class NumericsError(HyperchannelError):
    """A numerical procedure failed to converge."""
