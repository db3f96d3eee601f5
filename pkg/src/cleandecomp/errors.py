"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`CleanDecompError`, so callers (the CLI, the campaign runner) can
separate input problems from genuine bugs.
"""


class CleanDecompError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CleanDecompError, ValueError):
    """Operands have incompatible shapes, or the matrix is empty/rectangular."""


class NonFiniteEntries(CleanDecompError, ValueError):
    """A matrix contains NaN or infinite entries."""


class InvalidTolerance(CleanDecompError, ValueError):
    pass


class NotHermitian(CleanDecompError, ValueError):
    pass


class NotAProjection(CleanDecompError, ValueError):
    pass


class NotAPartialIsometry(CleanDecompError, ValueError):
    pass


class BlockMismatch(CleanDecompError, ValueError):
    pass


class CornerNotBoundedBelow(CleanDecompError):
    """The compression of T*T to a corner is not bounded below by a^2."""


class NotGenericPosition(CleanDecompError):
    pass


class NotInvertibleDifference(CleanDecompError):
    pass


class WitnessMismatch(CleanDecompError):
    pass


class CornerNotInvertible(CleanDecompError):
    pass


class BadOffDiagonal(CleanDecompError):
    pass


class ConditionAFailed(CleanDecompError):
    """Lower bound on T*T fails on one side of the splitting projection."""

    def __init__(self, side, measured, required=None):
        self.side = side
        self.measured = measured
        self.required = required
        msg = f"condition (a) fails on the {side} side: measured {measured:.6g}"
        if required is not None:
            msg += f", required at least {required:.6g}"
        super().__init__(msg)


class ConditionBFailed(CleanDecompError):
    pass


class InternalInvariantViolation(CleanDecompError, AssertionError):
    """A guaranteed identity failed numerically; almost always a tolerance issue."""


class UnknownGenerator(CleanDecompError, ValueError):
    pass
