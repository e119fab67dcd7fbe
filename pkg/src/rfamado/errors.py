"""Exception hierarchy. The CLI maps each class to an exit code."""


class RfaMadoError(Exception):
    exit_code = 1


class ConfigError(RfaMadoError, ValueError):
    """Invalid parameters or configuration (usage error)."""

    exit_code = 2


class DataError(RfaMadoError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class NumericError(RfaMadoError, ArithmeticError):
    """A numerical routine failed (e.g. quadrature did not converge)."""

    exit_code = 4
