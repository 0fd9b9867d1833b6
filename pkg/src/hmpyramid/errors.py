"""Exception types shared across the package.

Everything derives from HmError so callers can catch package failures in one
clause; the ValueError / RuntimeError mixins keep the types usable with plain
idiomatic handling too.
"""


class HmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(HmError, ValueError):
    """Array shapes do not line up with what an operation requires."""


class ArchitectureError(HmError, ValueError):
    """Layer-size sequence violates a structural requirement."""


class FormatError(HmError, ValueError):
    """A byte stream does not parse as the expected file format."""


class ConsistencyError(HmError, ValueError):
    """Two parts of a dataset disagree (e.g. image and label counts)."""


class BudgetError(HmError, RuntimeError):
    """An exhaustive computation would exceed its configured size cap."""


class ConfigError(HmError, ValueError):
    """An experiment configuration is malformed or self-contradictory."""


class DataError(HmError, RuntimeError):
    """A dataset cannot be used as requested (missing, empty, too small)."""
