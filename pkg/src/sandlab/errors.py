"""Exception hierarchy shared across the package.

Callers (and the CLI exit-code mapping) distinguish three failure kinds:
bad user input or violated preconditions, exhausted resource budgets, and
internal consistency failures that indicate a bug rather than a user error.
"""


class SandlabError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(SandlabError):
    """Input violates a documented precondition (CLI exit code 2)."""


class ResourceLimitError(SandlabError):
    """A configured state or iteration budget was exceeded (CLI exit code 3)."""


class InternalError(SandlabError):
    """An internal invariant failed; this signals a bug, not a user error."""
