"""Exception hierarchy shared by the library, the service and the CLI."""


class SkitError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 70


class InputError(SkitError, ValueError):
    """Malformed or out-of-range user input."""

    exit_code = 65


class DegenerateInputError(InputError):
    """Input is well-formed but carries no usable information (e.g. constant data)."""


class EmptyStateError(SkitError):
    """An operation needs stored observations but none are available yet."""


class StateError(SkitError, RuntimeError):
    """Operation not allowed in the current session state."""

    exit_code = 64


class FormatError(SkitError, ValueError):
    """Snapshot or data file cannot be parsed."""

    exit_code = 65


class ConfigError(SkitError, ValueError):
    """Invalid configuration document; ``path`` locates the offending key."""

    exit_code = 64

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = ".".join(str(p) for p in self.path)
        super().__init__(f"{where}: {message}" if where else message)


class InvariantError(SkitError, ArithmeticError):
    """A quantity that is bounded by construction left its bounds: this is a bug."""

    exit_code = 70
