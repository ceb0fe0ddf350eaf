"""Exception types shared across the package."""


class SatquantError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SatquantError):
    """Operand shapes are inconsistent with the requested operation."""


class SingularMatrix(SatquantError):
    """A pivot fell below the singularity tolerance during factorization."""


class DegenerateUpdate(SatquantError):
    """Rank-one inverse update denominator is numerically zero."""


class InvalidParameter(SatquantError):
    """A scalar parameter is outside its admissible range."""


class NoKernelVector(SatquantError):
    """No usable nullspace direction could be extracted from the free columns."""


class NoCrossing(SatquantError):
    """The step direction vanishes on every free coordinate."""


class CapTooSmall(SatquantError):
    """Requested saturation cap is smaller than the vector's max magnitude."""


class Infeasible(SatquantError):
    """The linear program has no feasible point (numerical breakdown here,
    since the programs solved in this package are feasible by construction)."""


class Unbounded(SatquantError):
    """The linear program is unbounded below (signals a construction bug)."""


class IterationLimit(SatquantError):
    """An iterative routine hit its iteration cap before converging."""


class DegenerateTieBreaker(SatquantError):
    """Tie-breaking vector redraws exhausted without reaching the required
    saturation count; the instance is not in general position."""


class TooLarge(SatquantError):
    """Exhaustive enumeration would exceed the configured guard."""


class InsufficientData(SatquantError):
    """Not enough sweep points to fit a scaling slope."""


class BoundViolated(SatquantError):
    """A measured error exceeded an unconditional deterministic bound.

    This is a hard failure: the bound holds for every input, so a violation
    indicates an implementation bug rather than an unlucky instance.
    """


class UnknownActivation(SatquantError):
    """Activation tag is not one of the supported names."""


class InvalidDims(SatquantError):
    """Experiment dimensions are inconsistent (e.g. N0 <= m)."""


class ParseError(SatquantError):
    """Malformed matrix file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateActivationsWarning(UserWarning):
    """A layer's activation matrix has rank below the number of data points;
    quantization proceeds with the baseline pre-processing method."""
