"""Exception types shared across the package."""


class ScheffeRobustError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ScheffeRobustError, ValueError):
    """Invalid user-supplied configuration (bad epsilon, clipping constants, ...)."""


class ContractError(ScheffeRobustError, ValueError):
    """Two objects that must agree (family, nuisance parameters) do not."""


class DomainError(ScheffeRobustError, ValueError):
    """A bound or formula was evaluated outside its region of validity."""


class DegenerateSetError(ScheffeRobustError, ValueError):
    """The two hypotheses coincide, so no separating set exists."""


class EmptyNetError(ScheffeRobustError, ValueError):
    """Net construction produced no admissible center."""
