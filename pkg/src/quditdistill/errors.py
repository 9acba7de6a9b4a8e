"""Exception types raised across the package."""


class DistillationError(ValueError):
    """Base class for all errors raised by quditdistill."""


class InvalidDimensionError(DistillationError):
    pass


class DimensionMismatchError(DistillationError):
    pass


class UnsupportedVariantError(DistillationError):
    pass


class InvalidStateError(DistillationError):
    """Density matrix or weight matrix violates its invariants."""


class DegenerateDistributionError(DistillationError):
    """Normalizer underflowed: all weight sits on discarded branches."""


class OutOfRangeError(DistillationError):
    pass


class OutOfBasinError(DistillationError):
    """Initial fidelity does not flow to the pure fixed point."""
