"""History families on a time grid, chain kets, the consistency condition,
and extended Born probabilities.

A history assigns one property (projector) to each event time; a family
bundles an initial condition, the strictly increasing time grid, the
unitary propagators between neighbouring times, and its histories.  Chain
kets alternate propagation with projection; their Gram matrix decides
whether the family is consistent, and its diagonal supplies the
probabilities.

Families are usually built from per-time event slots (the Cartesian
product of labelled, mutually orthogonal projectors), but explicit
branch-dependent history lists are accepted as long as the history-space
sum rule can be verified.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadTimeGrid,
    DimensionMismatch,
    InconsistentFamily,
    NonUnitaryPropagator,
    NotDensityMatrix,
    NotNormalized,
    NotOrthogonal,
    NotPDIStructured,
    NotPureInitial,
    SumRuleViolation,
    UnknownLabel,
    ZeroConditioningEvent,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    Tolerances,
    as_complex_ket,
    as_complex_matrix,
    dagger,
    frobenius_norm,
    hermitian_eigendecomposition,
    readonly,
    tensor_product,
    unitary_from_hamiltonian,
)
from .properties import DecompositionOfIdentity, Projector

__all__ = [
    "InitialCondition",
    "History",
    "EventSlot",
    "HistoryFamily",
    "ConsistencyReport",
    "ProbabilityTable",
    "build_family",
    "chain_ket",
    "chain_operator",
    "consistency_check",
    "assign_probabilities",
    "event_probability",
    "marginal_distribution",
    "conditional_probability",
]

#: largest history-space dimension for the explicit Kronecker sum-rule check
SUM_RULE_DIM_CAP = 4096

#: slack allowed on probability normalization sums
_NORMALIZATION_SLACK = 1e-9

#: separator joining per-time event labels into a history label
LABEL_SEPARATOR = ","


@dataclass(frozen=True, eq=False)
class InitialCondition:
    """State at the first grid time: a unit ket or a density matrix."""

    ket: np.ndarray | None
    rho: np.ndarray | None

    @classmethod
    def pure(cls, ket, tol: Tolerances = DEFAULT_TOLERANCES) -> "InitialCondition":
        k = as_complex_ket(ket)
        norm = float(np.linalg.norm(k))
        if abs(norm - 1.0) > tol.validation:
            raise NotNormalized(f"initial ket has norm {norm!r}")
        return cls(readonly(k.copy()), None)

    @classmethod
    def density(cls, rho, tol: Tolerances = DEFAULT_TOLERANCES) -> "InitialCondition":
        r = as_complex_matrix(rho)
        if r.shape[0] != r.shape[1]:
            raise NotDensityMatrix("density matrix must be square")
        scale = max(1.0, frobenius_norm(r))
        if frobenius_norm(r - dagger(r)) > tol.validation * scale:
            raise NotDensityMatrix("density matrix is not hermitian")
        if abs(float(r.trace().real) - 1.0) > tol.validation:
            raise NotDensityMatrix(f"density matrix has trace {r.trace()!r}")
        sym = (r + dagger(r)) / 2.0
        eig = hermitian_eigendecomposition(sym, tol)
        if float(eig.eigenvalues.min()) < -tol.validation:
            raise NotDensityMatrix(
                f"density matrix has negative eigenvalue {eig.eigenvalues.min():.3e}"
            )
        return cls(None, readonly(sym))

    @property
    def kind(self) -> str:
        return "pure" if self.ket is not None else "density"

    @property
    def dim(self) -> int:
        return self.ket.size if self.ket is not None else self.rho.shape[0]

    def weight_matrix(self) -> np.ndarray:
        """The operator weighting chain products: [psi0] for pure, rho otherwise."""
        if self.ket is not None:
            return np.outer(self.ket, self.ket.conj())
        return np.array(self.rho)


@dataclass(frozen=True, eq=False)
class History:
    """One property per event time; ``alpha`` holds the slot member indices
    when the history came from per-time event slots."""

    label: str
    events: tuple[Projector, ...]
    alpha: tuple[int, ...] | None = None


@dataclass(frozen=True, eq=False)
class EventSlot:
    """Labelled, mutually orthogonal events offered at one grid time."""

    labels: tuple[str, ...]
    projectors: tuple[Projector, ...]
    complete: bool

    def remainder_matrix(self) -> np.ndarray:
        dim = self.projectors[0].dim
        out = np.eye(dim, dtype=np.complex128)
        for p in self.projectors:
            out -= p.matrix
        return out


@dataclass(frozen=True, eq=False)
class HistoryFamily:
    initial: InitialCondition
    times: tuple[float, ...]
    propagators: tuple[np.ndarray, ...]
    histories: tuple[History, ...]
    slots: tuple[EventSlot, ...] | None = None

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(h.label for h in self.histories)

    def history(self, label: str) -> History:
        for h in self.histories:
            if h.label == label:
                return h
        raise UnknownLabel(f"no history labelled {label!r}")


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    """Gram matrix of the family plus the verdict for the requested mode."""

    gram: np.ndarray
    mode: str
    consistent: bool
    worst_offdiag: float
    offending_pair: tuple[str, str] | None


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """Extended Born weights of a strongly consistent family.

    Weights below the zero floor are stored as exactly 0.0; zero-probability
    histories stay in the table rather than being pruned.
    """

    family: HistoryFamily
    mu: np.ndarray
    normalization: float

    @property
    def labels(self) -> tuple[str, ...]:
        return self.family.labels

    def probability(self, label: str) -> float:
        for h, value in zip(self.family.histories, self.mu):
            if h.label == label:
                return float(value)
        raise UnknownLabel(f"no history labelled {label!r}")

    def as_pairs(self) -> list[tuple[str, float]]:
        return [(h.label, float(v)) for h, v in zip(self.family.histories, self.mu)]


def _normalize_slot(slot, dim: int, tol: Tolerances) -> EventSlot:
    if isinstance(slot, DecompositionOfIdentity):
        if slot.dim != dim:
            raise DimensionMismatch(
                f"event slot acts on dimension {slot.dim}, family on {dim}"
            )
        return EventSlot(slot.labels, slot.projectors, complete=True)
    pairs = list(slot)
    if not pairs:
        raise ValueError("an event slot needs at least one labelled projector")
    labels = tuple(str(label) for label, _ in pairs)
    projectors = tuple(proj for _, proj in pairs)
    if len(set(labels)) != len(labels):
        raise ValueError("event labels within a slot must be unique")
    for p in projectors:
        if not isinstance(p, Projector):
            raise TypeError("slot events must be Projector instances")
        if p.dim != dim:
            raise DimensionMismatch(
                f"event slot acts on dimension {p.dim}, family on {dim}"
            )
    for j in range(len(projectors)):
        for k in range(j + 1, len(projectors)):
            residual = frobenius_norm(projectors[j].matrix @ projectors[k].matrix)
            if residual > tol.validation:
                raise NotOrthogonal(
                    f"slot events {labels[j]!r} and {labels[k]!r} overlap "
                    f"(product norm {residual:.3e})"
                )
    total = np.zeros((dim, dim), dtype=np.complex128)
    for p in projectors:
        total += p.matrix
    complete = frobenius_norm(total - np.eye(dim)) <= tol.validation
    return EventSlot(labels, projectors, complete)


def _expand_product(slots: Sequence[EventSlot]) -> tuple[History, ...]:
    histories = []
    index_ranges = [range(len(s.projectors)) for s in slots]
    for alpha in itertools.product(*index_ranges):
        label = LABEL_SEPARATOR.join(s.labels[i] for s, i in zip(slots, alpha))
        events = tuple(s.projectors[i] for s, i in zip(slots, alpha))
        histories.append(History(label, events, tuple(alpha)))
    return tuple(histories)


def _initial_slot_matrix(initial: InitialCondition) -> np.ndarray:
    # A density initial is not a projector, so the sum rule treats its slot
    # as the whole space.
    if initial.kind == "pure":
        return np.outer(initial.ket, initial.ket.conj())
    return np.eye(initial.dim, dtype=np.complex128)


def _kron_chain(factors: Iterable[np.ndarray]) -> np.ndarray:
    out = None
    for f in factors:
        out = f if out is None else tensor_product(out, f)
    return out


def _check_sum_rule(
    initial: InitialCondition,
    slots: tuple[EventSlot, ...] | None,
    histories: tuple[History, ...],
    dim: int,
    steps: int,
    tol: Tolerances,
) -> None:
    history_dim = dim ** (steps + 1)
    f0 = _initial_slot_matrix(initial)
    eye = np.eye(dim, dtype=np.complex128)
    if slots is not None:
        if history_dim > SUM_RULE_DIM_CAP:
            return  # orthogonality per slot already guarantees the rule
        # The histories cover the full Cartesian product of the padded
        # slots, so the history-space sum factors into one Kronecker chain
        # over the per-slot sums.
        slot_sums = []
        for slot in slots:
            total_slot = np.zeros((dim, dim), dtype=np.complex128)
            for p in slot.projectors:
                total_slot += p.matrix
            if not slot.complete:
                total_slot += slot.remainder_matrix()
            slot_sums.append(total_slot)
        total = _kron_chain([f0, *slot_sums])
        total += _kron_chain([eye - f0] + [eye] * steps)
        residual = frobenius_norm(total - np.eye(history_dim))
        if residual > tol.validation * np.sqrt(history_dim):
            raise SumRuleViolation(
                f"event slots violate the history-space sum rule "
                f"(residual {residual:.3e})"
            )
        return
    if history_dim > SUM_RULE_DIM_CAP:
        raise SumRuleViolation(
            f"history space dimension {history_dim} exceeds the verification "
            f"cap {SUM_RULE_DIM_CAP}; explicit history lists cannot be accepted"
        )
    total = np.zeros((history_dim, history_dim), dtype=np.complex128)
    for h in histories:
        total += _kron_chain([f0, *(p.matrix for p in h.events)])
    expected = _kron_chain([f0] + [eye] * steps)
    residual = frobenius_norm(total - expected)
    if residual > tol.validation * np.sqrt(history_dim):
        raise SumRuleViolation(
            f"histories violate the history-space sum rule (residual {residual:.3e})"
        )


def build_family(
    initial: InitialCondition,
    times: Sequence[float],
    *,
    propagators: Sequence | None = None,
    hamiltonian=None,
    hbar: float = 1.0,
    events: Sequence | None = None,
    histories: Sequence[History] | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> HistoryFamily:
    """Assemble and validate a history family.

    Dynamics come either from explicit per-interval ``propagators`` or from
    one time-independent ``hamiltonian``.  Events come either as per-time
    ``events`` slots (each a DecompositionOfIdentity or a sequence of
    ``(label, Projector)`` pairs, expanded to their Cartesian product) or
    as an explicit ``histories`` list, which may be branch-dependent.

    Slots need not sum to the identity: the omitted remainder is treated as
    an implicit zero-probability event and accounted for when the sum rule
    is verified.
    """
    grid = tuple(float(t) for t in times)
    if len(grid) < 2:
        raise BadTimeGrid("a family needs at least two times")
    if any(t2 <= t1 for t1, t2 in zip(grid, grid[1:])):
        raise BadTimeGrid(f"times must be strictly increasing, got {list(grid)}")
    steps = len(grid) - 1
    dim = initial.dim

    if (propagators is None) == (hamiltonian is None):
        raise ValueError("supply exactly one of propagators or hamiltonian")
    if hamiltonian is not None:
        props = tuple(
            unitary_from_hamiltonian(hamiltonian, t2 - t1, hbar=hbar, tol=tol)
            for t1, t2 in zip(grid, grid[1:])
        )
    else:
        props = tuple(as_complex_matrix(u) for u in propagators)
        if len(props) != steps:
            raise ValueError(f"need {steps} propagators, got {len(props)}")
    for u in props:
        if u.shape != (dim, dim):
            raise DimensionMismatch(
                f"propagator shape {u.shape} does not match dimension {dim}"
            )
        defect = frobenius_norm(dagger(u) @ u - np.eye(dim))
        if defect > tol.validation:
            raise NonUnitaryPropagator(f"propagator unitarity defect {defect:.3e}")
    props = tuple(readonly(u.copy()) for u in props)

    if (events is None) == (histories is None):
        raise ValueError("supply exactly one of events or histories")
    if events is not None:
        if len(events) != steps:
            raise ValueError(f"need {steps} event slots, got {len(events)}")
        slots = tuple(_normalize_slot(s, dim, tol) for s in events)
        hists = _expand_product(slots)
    else:
        slots = None
        hists = tuple(histories)
        if not hists:
            raise ValueError("a family needs at least one history")
        labels = [h.label for h in hists]
        if len(set(labels)) != len(labels):
            raise ValueError("history labels must be unique")
        for h in hists:
            if len(h.events) != steps:
                raise ValueError(
                    f"history {h.label!r} has {len(h.events)} events, expected {steps}"
                )
            for p in h.events:
                if p.dim != dim:
                    raise DimensionMismatch(
                        f"history {h.label!r} event acts on dimension {p.dim}"
                    )

    _check_sum_rule(initial, slots, hists, dim, steps, tol)
    return HistoryFamily(initial, grid, props, hists, slots)


def _resolve(family: HistoryFamily, history) -> History:
    if isinstance(history, History):
        return history
    return family.history(str(history))


def chain_ket(family: HistoryFamily, history) -> np.ndarray:
    """P_f T(t_f, t_{f-1}) ... P_1 T(t_1, t_0) applied to the initial ket."""
    if family.initial.kind != "pure":
        raise NotPureInitial("chain kets require a pure initial condition")
    h = _resolve(family, history)
    vec = np.array(family.initial.ket, dtype=np.complex128)
    for u, event in zip(family.propagators, h.events):
        vec = u @ vec
        vec = event.matrix @ vec
    return vec


def _transition_operator(family: HistoryFamily, history: History) -> np.ndarray:
    out = np.eye(family.dim, dtype=np.complex128)
    for u, event in zip(family.propagators, history.events):
        out = u @ out
        out = event.matrix @ out
    return out


def chain_operator(family: HistoryFamily, history) -> np.ndarray:
    """The history's chain operator, ending in the initial weight.

    For a pure initial condition this is C |psi0><psi0| with C the
    projector/propagator product, so Tr(K^dag K) equals the chain-ket
    inner product; for a density initial it is C rho.
    """
    h = _resolve(family, history)
    return _transition_operator(family, h) @ family.initial.weight_matrix()


def _gram_matrix(family: HistoryFamily) -> np.ndarray:
    n = len(family.histories)
    if family.initial.kind == "pure":
        kets = np.stack([chain_ket(family, h) for h in family.histories])
        return kets.conj() @ kets.T
    rho = family.initial.rho
    ops = [_transition_operator(family, h) for h in family.histories]
    gram = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            gram[i, j] = np.trace(dagger(ops[i]) @ ops[j] @ rho)
    return gram


def consistency_check(
    family: HistoryFamily,
    mode: str = "strong",
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ConsistencyReport:
    """Gram-matrix test of the consistency condition.

    ``strong`` demands vanishing off-diagonal inner products; ``weak`` only
    vanishing real parts.  Single-event-time families pass automatically.
    """
    if mode not in ("strong", "weak"):
        raise ValueError(f"mode must be 'strong' or 'weak', got {mode!r}")
    gram = _gram_matrix(family)
    off = np.abs(gram) if mode == "strong" else np.abs(gram.real)
    np.fill_diagonal(off, 0.0)
    worst = float(off.max()) if off.size else 0.0
    consistent = worst <= tol.consistency
    pair = None
    if not consistent:
        i, j = np.unravel_index(int(np.argmax(off)), off.shape)
        pair = (family.histories[i].label, family.histories[j].label)
    return ConsistencyReport(readonly(gram), mode, consistent, worst, pair)


def assign_probabilities(
    family: HistoryFamily,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ProbabilityTable:
    """Extended Born weights mu = diagonal of the Gram matrix.

    Requires strong consistency (InconsistentFamily carries the report
    otherwise).  Weights below ``tol.convergence`` are snapped to exactly
    zero; zero-weight histories are kept.
    """
    report = consistency_check(family, "strong", tol)
    if not report.consistent:
        raise InconsistentFamily(report)
    mu = np.diag(report.gram).real.copy()
    if float(mu.min(initial=0.0)) < -tol.convergence:
        raise ArithmeticError(f"negative history weight {mu.min():.3e}")
    mu[mu < tol.convergence] = 0.0
    normalization = float(mu.sum())
    if normalization > 1.0 + _NORMALIZATION_SLACK:
        raise ArithmeticError(f"weights sum to {normalization!r} > 1")
    exhaustive = family.slots is None or all(s.complete for s in family.slots)
    if exhaustive and abs(normalization - 1.0) > _NORMALIZATION_SLACK:
        raise ArithmeticError(
            f"exhaustive family weights sum to {normalization!r}, expected 1"
        )
    return ProbabilityTable(family, readonly(mu), normalization)


def _label_index(table: ProbabilityTable) -> dict[str, int]:
    return {h.label: i for i, h in enumerate(table.family.histories)}


def event_probability(table: ProbabilityTable, labels: Iterable[str]) -> float:
    """Probability of the event containing the listed histories.

    The sum runs in table order so results are reproducible bit for bit.
    """
    index = _label_index(table)
    wanted = set()
    for label in labels:
        if label not in index:
            raise UnknownLabel(f"no history labelled {label!r}")
        wanted.add(index[label])
    total = 0.0
    for i, value in enumerate(table.mu):
        if i in wanted:
            total += float(value)
    return total


def marginal_distribution(
    table: ProbabilityTable, time_index: int
) -> list[tuple[str, float]]:
    """Distribution over the event labels at grid time ``time_index`` (1-based).

    Only defined for slot-structured families.
    """
    family = table.family
    if family.slots is None:
        raise NotPDIStructured("marginals need a family built from event slots")
    if not 1 <= int(time_index) <= family.steps:
        raise ValueError(
            f"time index must lie in 1..{family.steps}, got {time_index!r}"
        )
    slot = family.slots[int(time_index) - 1]
    sums = [0.0] * len(slot.labels)
    for h, value in zip(family.histories, table.mu):
        sums[h.alpha[int(time_index) - 1]] += float(value)
    return list(zip(slot.labels, sums))


def conditional_probability(
    table: ProbabilityTable,
    given: Iterable[str],
    target: Iterable[str],
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """Pr(target | given) within one consistent family."""
    given = list(given)
    prob_given = event_probability(table, given)
    if prob_given <= tol.convergence:
        raise ZeroConditioningEvent(
            f"conditioning event has probability {prob_given!r}"
        )
    overlap = set(given) & set(target)
    # make sure every target label exists, even when the overlap is smaller
    event_probability(table, target)
    return event_probability(table, overlap) / prob_given
