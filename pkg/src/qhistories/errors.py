"""Exception types raised across the engine.

Most carry enough structure for callers to render a useful verdict: the
meaningless-combination error keeps both operands and the commutator norm,
the inconsistent-family error keeps the full consistency report, and so on.
"""

from __future__ import annotations


class QHistoriesError(Exception):
    """Base class for every engine-specific error."""


# --- numeric kernels ---------------------------------------------------


class NotHermitian(QHistoriesError):
    """Input matrix is not Hermitian within tolerance (or not square)."""


class NoConvergence(QHistoriesError):
    """Iterative eigensolver exhausted its sweep budget."""


class NotOrthonormal(QHistoriesError):
    """Supplied vectors fail the orthonormality check."""


class DimensionMismatch(QHistoriesError):
    """Operands live on Hilbert spaces of different dimensions."""


# --- properties and frameworks ------------------------------------------


class NotAProjector(QHistoriesError):
    """Matrix is not Hermitian-idempotent with near-integer trace."""


class ZeroVector(QHistoriesError):
    """A ket with (numerically) zero norm defines no property."""


class IncompletePDI(QHistoriesError):
    """Members fail to sum to the identity (or include a rank-0 member)."""


class NotOrthogonal(QHistoriesError):
    """Two members of a would-be decomposition have a nonzero product."""


class TooManyMembers(QHistoriesError):
    """Event algebra requested for more members than supported."""


class MeaninglessError(QHistoriesError):
    """Conjunction/disjunction of noncommuting properties.

    The combination is undefined, not false: there is no projector for it.
    Carries ``left``, ``right`` and the Frobenius ``commutator_norm``.
    """

    def __init__(self, left, right, commutator_norm: float, operation: str = "conjunction"):
        self.left = left
        self.right = right
        self.commutator_norm = float(commutator_norm)
        self.operation = operation
        super().__init__(
            f"{operation} of noncommuting properties is meaningless "
            f"(commutator norm {self.commutator_norm:.6e})"
        )


class IncompatibleError(QHistoriesError):
    """Two frameworks admit no common refinement.

    Carries the labels of the first noncommuting member pair.
    """

    def __init__(self, left_label: str, right_label: str, commutator_norm: float):
        self.left_label = left_label
        self.right_label = right_label
        self.commutator_norm = float(commutator_norm)
        super().__init__(
            f"no common refinement: members {left_label!r} and {right_label!r} "
            f"do not commute (commutator norm {self.commutator_norm:.6e})"
        )


# --- history families -----------------------------------------------------


class SumRuleViolation(QHistoriesError):
    """Family histories do not exhaust the history-space identity."""


class NonUnitaryPropagator(QHistoriesError):
    """A supplied propagator fails the unitarity check."""


class BadTimeGrid(QHistoriesError):
    """Times are not strictly increasing (or fewer than two)."""


class NotPureInitial(QHistoriesError):
    """Chain kets need a pure initial condition."""


class InconsistentFamily(QHistoriesError):
    """Probabilities requested for a family that fails the consistency test.

    Carries the offending ``report``.
    """

    def __init__(self, report):
        self.report = report
        pair = report.offending_pair
        where = f" (worst pair {pair[0]!r}, {pair[1]!r})" if pair else ""
        super().__init__(
            f"family is not consistent: worst off-diagonal "
            f"{report.worst_offdiag:.6e}{where}"
        )


class UnknownLabel(QHistoriesError):
    """Referenced history label does not belong to the table."""


class NotPDIStructured(QHistoriesError):
    """Marginals need a family built from per-time event slots."""


class ZeroConditioningEvent(QHistoriesError):
    """Conditioning event has (numerically) zero probability."""


# --- measurement models ----------------------------------------------------


class PointerOverlapsReady(QHistoriesError):
    """A pointer ket is not orthogonal to the apparatus ready ket."""


# --- information bounds -----------------------------------------------------


class NotNormalized(QHistoriesError):
    """Probabilities/amplitudes fail their normalization check."""


class NotDensityMatrix(QHistoriesError):
    """Matrix is not Hermitian, positive semidefinite and trace-1."""


# --- scenario runner ---------------------------------------------------------


class ParseError(QHistoriesError):
    """Scenario document is malformed."""


class UnknownReference(QHistoriesError):
    """Scenario command or declaration names an undeclared entity."""


class ExecutionError(QHistoriesError):
    """A scenario command failed for non-physics reasons."""
