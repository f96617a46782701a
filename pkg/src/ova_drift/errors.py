"""Exception hierarchy shared by all modules.

Every error raised on bad caller input derives from OvaDriftError so the
CLI and the HTTP service can map the whole family to one exit code /
status code.
"""


class OvaDriftError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(OvaDriftError):
    """An argument violates a documented precondition."""


class ParseError(OvaDriftError):
    """A text input (embedding table, corpus file, report) is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(OvaDriftError):
    """A configuration value is inconsistent with the data it is applied to."""
