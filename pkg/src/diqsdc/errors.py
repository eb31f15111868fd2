"""Exception types raised across the package."""


class DiqsdcError(Exception):
    """Base class for all package errors."""


class DomainError(DiqsdcError, ValueError):
    """An argument lies outside the domain of a formula."""


class NotViolating(DiqsdcError, ValueError):
    """The CHSH value does not exceed the classical bound of 2."""


class InsufficientSamples(DiqsdcError):
    """Too few check pairs to estimate a correlator."""


class MalformedState(DiqsdcError, ValueError):
    """A state is outside the domain accepted by an operation."""


class DegenerateState(DiqsdcError, ValueError):
    """A heralded operation has zero success probability on this input."""


class EppIneffective(DiqsdcError, ValueError):
    """Purification cannot raise the fidelity of this input (p <= 1/3)."""


class TargetUnreachable(DiqsdcError):
    """The purification target was not met within the iteration budget."""


class ConfigError(DiqsdcError, ValueError):
    """Invalid protocol or CLI configuration."""


class SpecError(ConfigError):
    """Malformed sweep name or grid string."""
