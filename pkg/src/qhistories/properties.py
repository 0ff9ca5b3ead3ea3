"""Quantum properties as projectors, and the frameworks built from them.

A property of a finite-dimensional system is a Hermitian idempotent (a
projector); a framework is a projective decomposition of the identity
(PDI): mutually orthogonal projectors summing to the identity.  The
combination rules enforce the single framework rule -- conjunction and
disjunction exist only for commuting operands, and a noncommuting
combination raises MeaninglessError rather than producing an operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IncompatibleError,
    IncompletePDI,
    MeaninglessError,
    NotAProjector,
    NotOrthogonal,
    TooManyMembers,
    ZeroVector,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    Tolerances,
    as_complex_matrix,
    as_complex_ket,
    dagger,
    frobenius_norm,
    hermitian_eigendecomposition,
    readonly,
)

__all__ = [
    "Projector",
    "DecompositionOfIdentity",
    "ObservableSpectrum",
    "make_projector",
    "identity_projector",
    "zero_projector",
    "observable_to_pdi",
    "validate_pdi",
    "negation",
    "conjunction",
    "disjunction",
    "commutator_norm",
    "compatible",
    "common_refinement",
    "event_algebra",
]

#: relative window for reading an integer rank off a trace
_RANK_WINDOW = 1e-8

#: relative eigenvalue gap below which spectral clusters merge
_CLUSTER_RTOL = 1e-8

#: largest framework size event_algebra will expand (2**n elements)
_ALGEBRA_CAP = 16


@dataclass(frozen=True, eq=False)
class Projector:
    """A validated Hermitian idempotent with an integer rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"Projector(dim={self.dim}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class DecompositionOfIdentity:
    """Mutually orthogonal projectors that sum to the identity."""

    projectors: tuple[Projector, ...]
    labels: tuple[str, ...]
    dim: int

    def __len__(self) -> int:
        return len(self.projectors)

    def member(self, label: str) -> Projector:
        try:
            return self.projectors[self.labels.index(label)]
        except ValueError:
            raise KeyError(label) from None

    def __repr__(self) -> str:
        return f"DecompositionOfIdentity(dim={self.dim}, labels={list(self.labels)})"


@dataclass(frozen=True, eq=False)
class ObservableSpectrum:
    """Distinct eigenvalues of an observable with its spectral framework."""

    eigenvalues: tuple[float, ...]
    pdi: DecompositionOfIdentity

    def observable(self) -> np.ndarray:
        out = np.zeros((self.pdi.dim, self.pdi.dim), dtype=np.complex128)
        for value, proj in zip(self.eigenvalues, self.pdi.projectors):
            out += value * proj.matrix
        return out


def make_projector(source, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """Build a projector from a ket (normalized first) or validate a matrix.

    A ket yields the rank-1 projector onto its ray.  A matrix must be
    Hermitian and idempotent within ``tol.validation`` (relative to
    max(1, ||P||)) with trace within 1e-8 of an integer.
    """
    arr = np.asarray(source, dtype=np.complex128)
    if arr.ndim == 1:
        norm = float(np.linalg.norm(arr))
        if norm <= tol.convergence:
            raise ZeroVector("a zero ket defines no property")
        ket = arr / norm
        return Projector(readonly(np.outer(ket, ket.conj())), 1)
    mat = as_complex_matrix(arr)
    if mat.shape[0] != mat.shape[1]:
        raise NotAProjector(f"matrix is {mat.shape[0]}x{mat.shape[1]}, not square")
    scale = max(1.0, frobenius_norm(mat))
    herm = frobenius_norm(mat - dagger(mat))
    if herm > tol.validation * scale:
        raise NotAProjector(f"hermiticity residual {herm:.3e} too large")
    idem = frobenius_norm(mat @ mat - mat)
    if idem > tol.validation * scale:
        raise NotAProjector(f"idempotence residual {idem:.3e} too large")
    trace = float(mat.trace().real)
    rank = round(trace)
    if abs(trace - rank) > _RANK_WINDOW:
        raise NotAProjector(f"trace {trace!r} is not close to an integer rank")
    return Projector(readonly(mat.copy()), int(rank))


def identity_projector(dim: int) -> Projector:
    return Projector(readonly(np.eye(dim, dtype=np.complex128)), dim)


def zero_projector(dim: int) -> Projector:
    return Projector(readonly(np.zeros((dim, dim), dtype=np.complex128)), 0)


def _same_dim(p: Projector, q: Projector) -> None:
    if p.dim != q.dim:
        raise DimensionMismatch(f"projectors act on dimensions {p.dim} and {q.dim}")


def commutator_norm(p: Projector, q: Projector) -> float:
    """Frobenius norm of PQ - QP."""
    return frobenius_norm(p.matrix @ q.matrix - q.matrix @ p.matrix)


def _symmetrized_product(p: Projector, q: Projector) -> np.ndarray:
    prod = p.matrix @ q.matrix
    return (prod + dagger(prod)) / 2.0


def negation(p: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """The complementary property I - P ("not P")."""
    return make_projector(np.eye(p.dim) - p.matrix, tol=tol)


def conjunction(p: Projector, q: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """P AND Q, defined only when the projectors commute.

    Noncommuting operands have no conjunction -- the request is
    meaningless, not false -- so MeaninglessError is raised instead.
    """
    _same_dim(p, q)
    cnorm = commutator_norm(p, q)
    if cnorm > tol.validation:
        raise MeaninglessError(p, q, cnorm, operation="conjunction")
    return make_projector(_symmetrized_product(p, q), tol=tol)


def disjunction(p: Projector, q: Projector, tol: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """P OR Q = P + Q - PQ, defined only when the projectors commute."""
    _same_dim(p, q)
    cnorm = commutator_norm(p, q)
    if cnorm > tol.validation:
        raise MeaninglessError(p, q, cnorm, operation="disjunction")
    return make_projector(p.matrix + q.matrix - _symmetrized_product(p, q), tol=tol)


def validate_pdi(
    projectors,
    labels=None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> DecompositionOfIdentity:
    """Check mutual orthogonality and completeness, returning the framework.

    Labels default to ``p0, p1, ...``; they must be unique.  Rank-0 members
    are rejected, pairwise products must vanish within ``tol.validation``
    and the members must sum to the identity within the same tolerance.
    """
    projs = tuple(projectors)
    if not projs:
        raise IncompletePDI("a decomposition needs at least one member")
    dim = projs[0].dim
    for p in projs:
        if p.dim != dim:
            raise DimensionMismatch("members act on different dimensions")
    if labels is None:
        labels = tuple(f"p{j}" for j in range(len(projs)))
    else:
        labels = tuple(str(l) for l in labels)
    if len(labels) != len(projs):
        raise ValueError("one label per member required")
    if len(set(labels)) != len(labels):
        raise ValueError("labels must be unique")
    for label, p in zip(labels, projs):
        if p.rank == 0:
            raise IncompletePDI(f"member {label!r} has rank 0")
    for j in range(len(projs)):
        for k in range(j + 1, len(projs)):
            residual = frobenius_norm(projs[j].matrix @ projs[k].matrix)
            if residual > tol.validation:
                raise NotOrthogonal(
                    f"members {labels[j]!r} and {labels[k]!r} overlap "
                    f"(product norm {residual:.3e})"
                )
    total = np.zeros((dim, dim), dtype=np.complex128)
    for p in projs:
        total += p.matrix
    residual = frobenius_norm(total - np.eye(dim))
    if residual > tol.validation:
        raise IncompletePDI(f"members sum to identity with residual {residual:.3e}")
    if sum(p.rank for p in projs) != dim:
        raise IncompletePDI("member ranks do not add up to the dimension")
    return DecompositionOfIdentity(projs, labels, dim)


def observable_to_pdi(a, tol: Tolerances = DEFAULT_TOLERANCES) -> ObservableSpectrum:
    """Spectral decomposition of a Hermitian observable into a framework.

    Eigenvalues closer than 1e-8 relative to the spectral spread are merged
    into one degenerate member.
    """
    eig = hermitian_eigendecomposition(a, tol)
    values = eig.eigenvalues
    spread = float(values[0] - values[-1]) if values.size else 0.0
    gap = _CLUSTER_RTOL * max(1.0, spread)
    clusters: list[list[int]] = [[0]]
    for j in range(1, values.size):
        if values[clusters[-1][0]] - values[j] <= gap:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    members = []
    cluster_values = []
    for cluster in clusters:
        block = eig.eigenvectors[:, cluster]
        mat = block @ dagger(block)
        members.append(make_projector((mat + dagger(mat)) / 2.0, tol=tol))
        cluster_values.append(float(np.mean(values[cluster])))
    labels = tuple(f"eig{j}" for j in range(len(members)))
    pdi = validate_pdi(members, labels, tol=tol)
    return ObservableSpectrum(tuple(cluster_values), pdi)


def _same_dim_pdi(f: DecompositionOfIdentity, g: DecompositionOfIdentity) -> None:
    if f.dim != g.dim:
        raise DimensionMismatch(f"frameworks act on dimensions {f.dim} and {g.dim}")


def compatible(
    f: DecompositionOfIdentity,
    g: DecompositionOfIdentity,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> bool:
    """True when every member of f commutes with every member of g."""
    _same_dim_pdi(f, g)
    for p in f.projectors:
        for q in g.projectors:
            if commutator_norm(p, q) > tol.validation:
                return False
    return True


def common_refinement(
    f: DecompositionOfIdentity,
    g: DecompositionOfIdentity,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> DecompositionOfIdentity:
    """Finest framework containing both: all nonzero products P_j Q_k.

    Raises IncompatibleError naming the first noncommuting pair.  Labels
    join the parent labels as ``j∧k``.
    """
    _same_dim_pdi(f, g)
    members: list[Projector] = []
    labels: list[str] = []
    for lj, p in zip(f.labels, f.projectors):
        for lk, q in zip(g.labels, g.projectors):
            cnorm = commutator_norm(p, q)
            if cnorm > tol.validation:
                raise IncompatibleError(lj, lk, cnorm)
            prod = _symmetrized_product(p, q)
            if frobenius_norm(prod) <= tol.validation:
                continue
            members.append(make_projector(prod, tol=tol))
            labels.append(f"{lj}∧{lk}")
    return validate_pdi(members, labels, tol=tol)


def event_algebra(
    f: DecompositionOfIdentity,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> list[tuple[str, Projector]]:
    """All 2**n subset sums of the framework members, in binary-mask order.

    The empty subset is the zero operator (labelled "0", the always-false
    property) and the full subset is the identity.  Intended for small
    frameworks; more than 16 members raises TooManyMembers.
    """
    n = len(f.projectors)
    if n > _ALGEBRA_CAP:
        raise TooManyMembers(f"{n} members would expand to 2**{n} events")
    out: list[tuple[str, Projector]] = []
    for mask in range(2**n):
        picked = [j for j in range(n) if mask >> j & 1]
        mat = np.zeros((f.dim, f.dim), dtype=np.complex128)
        for j in picked:
            mat += f.projectors[j].matrix
        label = "+".join(f.labels[j] for j in picked) if picked else "0"
        out.append((label, make_projector(mat, tol=tol)))
    return out
