"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and an ``exit_code``
used by the command-line front end (2 validation, 3 numeric, 4 infeasible).
"""

from __future__ import annotations


class VoiError(Exception):
    code = "error"
    exit_code = 3

    def __init__(self, message: str = "", **context):
        self.context = context
        super().__init__(message or self.code)


class ValidationError(VoiError):
    code = "validation"
    exit_code = 2


class NonSquare(ValidationError):
    code = "non_square"


class RowSumViolation(ValidationError):
    code = "row_sum_violation"

    def __init__(self, row: int, deviation: float):
        super().__init__(f"row {row} sums to 1{deviation:+.3e}", row=row, deviation=deviation)
        self.row = row
        self.deviation = deviation


class NegativeEntry(ValidationError):
    code = "negative_entry"

    def __init__(self, i: int, j: int, value: float = float("nan")):
        super().__init__(f"entry ({i}, {j}) is negative ({value:.3e})", i=i, j=j)
        self.i, self.j = i, j


class Reducible(ValidationError):
    code = "reducible"


class Periodic(ValidationError):
    code = "periodic"

    def __init__(self, period: int):
        super().__init__(f"chain is periodic with period {period}", period=period)
        self.period = period


class DegenerateGamma(ValidationError):
    code = "degenerate_gamma"


class InvalidPartition(ValidationError):
    code = "invalid_partition"


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class NegativeEntryAfterPerturbation(ValidationError):
    code = "negative_after_perturbation"


class NoConvergence(VoiError):
    code = "no_convergence"

    def __init__(self, iterations: int, residual: float = float("nan")):
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})",
            iterations=iterations,
        )
        self.iterations = iterations


class AbsoluteContinuityViolation(VoiError):
    code = "absolute_continuity"

    def __init__(self, index, message: str = ""):
        super().__init__(message or f"p > 0 where q = 0 at {index}", index=index)
        self.index = index


class EmptyGroup(VoiError):
    code = "empty_group"

    def __init__(self, group: int):
        super().__init__(f"group {group} has no mass", group=group)
        self.group = group


class EmptyGroupCollapse(EmptyGroup):
    code = "empty_group_collapse"


class MonotonicityViolation(VoiError):
    code = "monotonicity_violation"

    def __init__(self, iteration: int, delta: float):
        super().__init__(
            f"free energy increased by {delta:.3e} at iteration {iteration}",
            iteration=iteration,
            delta=delta,
        )
        self.iteration = iteration
        self.delta = delta


class SingularTheta(VoiError):
    code = "singular_theta"

    def __init__(self, group: int, column: int):
        super().__init__(f"theta[{group}, {column}] vanishes", group=group, column=column)
        self.group, self.column = group, column


class FixedPointDivergence(VoiError):
    code = "fixed_point_divergence"

    def __init__(self, low: float, high: float, rounds: int):
        super().__init__(
            f"corrected beta oscillates between {low:.6g} and {high:.6g} after {rounds} rounds",
            low=low,
            high=high,
        )
        self.low, self.high = low, high


class IncompatibleRuns(VoiError):
    code = "incompatible_runs"


class NoCriticalPointInBracket(VoiError):
    code = "no_critical_point"
    exit_code = 4


class TooLarge(VoiError):
    code = "too_large"
    exit_code = 4
