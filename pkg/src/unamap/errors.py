"""Exception types shared across the package."""

from __future__ import annotations


class UnamapError(Exception):
    """Base class for all package-specific failures."""


class UnseenAtomError(UnamapError):
    """A token is not in the vocabulary and the policy forbids extending it."""


class DimensionMismatch(UnamapError):
    """A vector or matrix has a length inconsistent with its vocabulary."""


class InconsistentData(UnamapError):
    """SM = T admits no solution in the mode's mapping family."""


class NoiseUnsupportedInRelaxation(UnamapError):
    """A noise budget was requested for a relaxation that degenerates under it."""


class InfeasiblePolytope(UnamapError):
    """The consistency polytope is empty."""


class NumericalAmbiguity(UnamapError):
    """A slack value landed strictly between the classification thresholds."""


class CycleDetected(UnamapError):
    """The simplex anti-cycling safeguard tripped (unreachable under Bland's rule)."""


class BudgetExceeded(UnamapError):
    """Branch-and-bound exceeded its node cap."""


class SearchSpaceTooLarge(UnamapError):
    """The bounded enumeration box has more cells than the configured cap."""


class SearchBudgetExceeded(UnamapError):
    """Logical-form reconstruction explored more partial trees than allowed."""


class NotSafe(UnamapError):
    """An operation requiring a safe input was given an unsafe one."""

    def __init__(self, which: str) -> None:
        super().__init__(f"input is not in the safe set: {which}")
        self.which = which


class InfeasibleData(UnamapError):
    """No (mapping, candidate-selection) pair satisfies the supervision."""


class CleaningFailed(UnamapError):
    """A cleaning pass could not reach a consistent dataset."""
