"""Exception types shared across the package."""


class CedensityError(Exception):
    """Base class for all package errors."""


class BudgetExceeded(CedensityError):
    """A step or stage budget ran out before the search produced an answer.

    Carries the point (element, index, or checkpoint) at which the budget
    was exhausted, when one is identifiable.
    """

    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class InvalidWindow(CedensityError):
    """An empty or out-of-range evaluation window was requested."""


class InvalidResidue(CedensityError):
    """A residue outside [0, m) was supplied for a residue-class union."""


class PreconditionViolated(CedensityError):
    """A caller-asserted hypothesis failed when verified on the window."""

    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class ContractViolated(CedensityError):
    """An input object broke its declared behavioural contract mid-run."""


class CapExceeded(CedensityError):
    """A configured size cap (bit width, factorial block count) was exceeded."""


class RatioUnrealizable(CedensityError):
    """No integer interval realizing the required exact ratio fits the window."""

    def __init__(self, message, requirement=None):
        super().__init__(message)
        self.requirement = requirement


class WindowExhausted(CedensityError):
    """A construction needed elements beyond the finite evaluation window."""

    def __init__(self, message, requirement=None):
        super().__init__(message)
        self.requirement = requirement


class ConfigError(CedensityError):
    """A run configuration failed to parse or validate."""


class ArtifactError(CedensityError):
    """An artifact file is corrupt, truncated, or fails integrity checks."""
