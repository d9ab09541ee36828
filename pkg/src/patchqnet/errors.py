"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so keep the split stable:
data problems (missing/corrupt files), configuration/validation problems
(bad flag combinations, checkpoint mismatches), contract violations
(API misuse) and numerical failures (NaN gradients).
"""


class PatchQNetError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PatchQNetError):
    """A value fails an operation's preconditions (shape, finiteness, range)."""


class ContractError(PatchQNetError):
    """An API was called in a way its contract forbids."""


class ConfigurationError(PatchQNetError):
    """Inconsistent or unresolvable configuration (params, flags, sizes)."""


class DegenerateInputError(PatchQNetError):
    """Input on which the requested quantity is mathematically undefined."""


class DataFormatError(PatchQNetError):
    """A dataset file does not conform to its container format."""


class DatasetError(PatchQNetError):
    """Dataset present but unusable for the requested task."""


class NumericalError(PatchQNetError):
    """A numerical invariant broke at runtime (non-finite gradient/loss)."""
