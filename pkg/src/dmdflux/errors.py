"""Exception hierarchy shared across the package.

Each error carries a short machine-parsable ``code`` that the CLI prints as
``<code>: <message>`` on stderr, plus a stable nonzero exit status.
"""


class DmdfluxError(Exception):
    """Base class for all package errors."""

    code = "error"
    exit_code = 1


class ConfigError(DmdfluxError):
    code = "config-error"
    exit_code = 2


class MeshError(DmdfluxError, ValueError):
    code = "mesh-error"
    exit_code = 3


class AssemblyError(DmdfluxError, ValueError):
    code = "assembly-error"
    exit_code = 3


class NotSpdError(DmdfluxError):
    code = "not-spd"
    exit_code = 4


class SvdError(DmdfluxError):
    code = "svd-failure"
    exit_code = 4


class InstabilityError(DmdfluxError):
    """Non-finite state encountered during time stepping."""

    code = "instability"
    exit_code = 5

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TrainingError(DmdfluxError):
    code = "training-error"
    exit_code = 6


class LayoutError(DmdfluxError, ValueError):
    """Surrogate state layout does not match the operator or mesh."""

    code = "layout-mismatch"
    exit_code = 7


class HullError(DmdfluxError, ValueError):
    """Query parameter lies outside the sampled parameter rectangle."""

    code = "hull-violation"
    exit_code = 8


class OperatorFormatError(DmdfluxError):
    """Operator file is corrupt, truncated, or of the wrong kind."""

    code = "operator-format-error"
    exit_code = 9
