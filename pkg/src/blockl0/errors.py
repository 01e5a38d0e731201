"""Exception hierarchy shared by every blockl0 module."""


class BlockL0Error(Exception):
    """Base class for all library errors."""


class DimensionMismatch(BlockL0Error, ValueError):
    pass


class RankDeficient(BlockL0Error, ArithmeticError):
    """X_M'X_M is numerically singular; the model is outside the admissible set."""


class NotNested(BlockL0Error, ValueError):
    pass


class EmptyCollection(BlockL0Error, ValueError):
    pass


class DegenerateBlock(BlockL0Error, ValueError):
    """A block has no active or no inactive variables where a log count is needed."""


class InfeasibleN(BlockL0Error, ValueError):
    """Rounded block counts are not realisable at this sample size."""


class TooLarge(BlockL0Error, ValueError):
    """An exhaustive computation exceeds its configured budget."""


class OutOfRange(BlockL0Error, ValueError):
    pass


class DegenerateDirection(BlockL0Error, ArithmeticError):
    """An inactive column lies (numerically) in the span of the active columns."""


class BatchFailed(BlockL0Error, RuntimeError):
    """More than the tolerated share of simulation replicates failed."""
