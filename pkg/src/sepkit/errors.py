"""Exception taxonomy shared across the toolkit.

Every raised error carries a short category tag so the CLI can emit one
machine-greppable line (``error: <category>: <message>``) before exiting
nonzero.
"""


class SepkitError(Exception):
    category = "internal"


class DimensionError(SepkitError):
    """Operand shapes are incompatible with the requested operation."""

    category = "dimension"


class ConfigurationError(SepkitError):
    """Invalid or inconsistent configuration / parameter set."""

    category = "configuration"


class InputError(SepkitError):
    """Caller-supplied data violates a precondition."""

    category = "input"


class DomainError(SepkitError):
    """Mathematical domain violation (e.g. log of a non-positive value)."""

    category = "domain"


class DataIOError(SepkitError):
    """File ingestion or emission failed."""

    category = "io"


class GraphError(SepkitError):
    """Autodiff graph misuse (e.g. backward without a recording tape)."""

    category = "graph"
