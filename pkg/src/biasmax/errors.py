"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class BiasmaxError(Exception):
    exit_code = 1


class InputError(BiasmaxError, ValueError):
    """Malformed input: bad indices, sizes, or file formats."""

    exit_code = 2


class ConfigurationError(InputError):
    """Inconsistent configuration such as a missing bias transform."""


class FormatError(InputError):
    """A data file lacks expected columns or cannot be parsed."""


class PreconditionError(BiasmaxError):
    """An operation's structural precondition does not hold."""

    exit_code = 3


class SizeError(PreconditionError):
    """Instance too large for an exact method, or below a construction's minima."""


class DataError(BiasmaxError):
    """Data is well-formed but unusable (e.g. no qualifying users)."""

    exit_code = 2


class UndefinedNLUError(BiasmaxError, ZeroDivisionError):
    exit_code = 3
