"""Exception hierarchy shared by the library and the command-line front end."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class SILLError(Exception):
    """Root of every error raised by koopman_sill."""

    exit_code = EXIT_NUMERICAL


class ContractViolation(SILLError, ValueError):
    """Bad shapes, indices or arguments handed to an operation."""

    exit_code = EXIT_CONFIG


class DomainError(ContractViolation):
    """Non-finite numeric input."""


class InvariantViolation(SILLError):
    """An internal structure no longer satisfies its invariants."""


class ResourceLimitError(SILLError):
    """A requested grid or table would exceed the configured size limit."""

    exit_code = EXIT_CONFIG


class ConfigError(SILLError):
    """Invalid experiment configuration or model file."""

    exit_code = EXIT_CONFIG


class NumericalError(SILLError):
    """A fit, assembly or integration produced unusable numbers."""
