"""Exception taxonomy shared across the package.

Callers can catch the base class ``VqhtError``; the CLI maps subclasses to
exit codes (config/validation problems exit 2, non-convergence exits 3).
"""


class VqhtError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(VqhtError, ValueError):
    """Arguments outside an operation's documented domain."""


class ValidationError(VqhtError, ValueError):
    """A physical object failed its invariants (hermiticity, trace, PSD, ...)."""


class ResourceError(VqhtError, RuntimeError):
    """Requested tensor dimensions exceed the configured guard."""


class CutoffTooSmallError(VqhtError, RuntimeError):
    """Truncation losses exceeded the hard threshold even after escalation."""


class InternalError(VqhtError, RuntimeError):
    """An internal consistency check failed (e.g. unitary completion)."""


class ConfigError(VqhtError, ValueError):
    """Experiment configuration rejected before any computation."""


class ConvergenceError(VqhtError, RuntimeError):
    """An iterative routine exhausted its budget without converging."""
