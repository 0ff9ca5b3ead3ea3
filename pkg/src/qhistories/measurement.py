"""Projective measurement as unitary system-apparatus dynamics.

The model couples a measured system (dimension ``system_dim``) to an
apparatus (dimension ``apparatus_dim``) whose ready state evolves into one
of ``system_dim`` orthonormal pointer states, one per measured basis ket.
Three standard families describe the same run: the unitary development,
the pointer framework at the final time, and the retrodiction framework
that correlates pointer outcomes with the earlier microscopic state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NotNormalized,
    NotOrthonormal,
    PointerOverlapsReady,
)
from .histories import (
    HistoryFamily,
    InitialCondition,
    ProbabilityTable,
    assign_probabilities,
    build_family,
    conditional_probability,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    Tolerances,
    as_complex_ket,
    complete_to_unitary,
    dagger,
    frobenius_norm,
    readonly,
    tensor_product,
)
from .properties import (
    DecompositionOfIdentity,
    Projector,
    common_refinement,
    make_projector,
    negation,
    validate_pdi,
)

__all__ = [
    "MeasurementModel",
    "PointerDistribution",
    "build_measurement_model",
    "evolved_state",
    "pointer_projector",
    "system_projector",
    "pointer_pdi",
    "family_unitary",
    "family_pointer",
    "family_retrodiction",
    "pointer_probabilities_trace",
    "retrodict",
    "refine_by_pointer",
]


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Validated system/apparatus data with the interaction unitary."""

    system_basis: tuple[np.ndarray, ...]
    ready_ket: np.ndarray
    pointer_basis: tuple[np.ndarray, ...]
    post_states: tuple[np.ndarray, ...]
    interaction: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.system_basis[0].size

    @property
    def apparatus_dim(self) -> int:
        return self.ready_ket.size

    @property
    def total_dim(self) -> int:
        return self.system_dim * self.apparatus_dim

    def pointer_label(self, k: int) -> str:
        return f"M{k + 1}"

    def system_label(self, j: int) -> str:
        return f"s{j + 1}"


@dataclass(frozen=True, eq=False)
class PointerDistribution:
    """Probabilities of the apparatus pointer outcomes."""

    labels: tuple[str, ...]
    probabilities: np.ndarray

    def as_pairs(self) -> list[tuple[str, float]]:
        return [(l, float(p)) for l, p in zip(self.labels, self.probabilities)]


def _orthonormal_set(kets: Sequence[np.ndarray], what: str, tol: Tolerances) -> None:
    stacked = np.column_stack(kets)
    defect = frobenius_norm(dagger(stacked) @ stacked - np.eye(len(kets)))
    if defect > tol.validation:
        raise NotOrthonormal(f"{what} are not orthonormal (gram defect {defect:.3e})")


def build_measurement_model(
    system_basis: Sequence,
    ready_ket,
    pointer_basis: Sequence,
    post_states: Sequence | None = None,
    *,
    completion_order: Sequence[int] | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MeasurementModel:
    """Build the interaction unitary mapping |s_j>|ready> to |post_j>|M_j>.

    ``system_basis`` must be a complete orthonormal basis of the system;
    the pointer kets must be orthonormal and orthogonal to the ready ket,
    which forces ``apparatus_dim >= system_dim + 1``.  ``post_states``
    defaults to the measured basis (nondestructive measurement).  The
    unitary is completed deterministically; ``completion_order`` permutes
    the Gram-Schmidt seed basis, which must not change any statistics.
    """
    s_kets = [as_complex_ket(k) for k in system_basis]
    ds = len(s_kets)
    if ds == 0 or any(k.size != ds for k in s_kets):
        raise DimensionMismatch(
            "system basis must contain exactly dim-many kets of that dimension"
        )
    _orthonormal_set(s_kets, "system basis kets", tol)

    ready = as_complex_ket(ready_ket)
    dm = ready.size
    if abs(float(np.linalg.norm(ready)) - 1.0) > tol.validation:
        raise NotOrthonormal("ready ket is not normalized")
    pointers = [as_complex_ket(k) for k in pointer_basis]
    if len(pointers) != ds:
        raise DimensionMismatch(
            f"need one pointer ket per system basis ket ({ds}), got {len(pointers)}"
        )
    if any(k.size != dm for k in pointers):
        raise DimensionMismatch("pointer kets must share the apparatus dimension")
    if dm < ds + 1:
        raise DimensionMismatch(
            f"apparatus dimension {dm} too small: needs at least {ds + 1} "
            f"so the ready ket can be orthogonal to every pointer ket"
        )
    _orthonormal_set(pointers, "pointer kets", tol)
    for k, ptr in enumerate(pointers):
        overlap = abs(complex(np.conj(ptr) @ ready))
        if overlap > tol.validation:
            raise PointerOverlapsReady(
                f"pointer ket {k} overlaps the ready ket (|<M|ready>| = {overlap:.3e})"
            )

    if post_states is None:
        post = [k.copy() for k in s_kets]
    else:
        post = [as_complex_ket(k) for k in post_states]
        if len(post) != ds or any(k.size != ds for k in post):
            raise DimensionMismatch("post states must mirror the system basis shape")
        for k, ket in enumerate(post):
            if abs(float(np.linalg.norm(ket)) - 1.0) > tol.validation:
                raise NotOrthonormal(f"post state {k} is not normalized")

    domain = [tensor_product(s, ready) for s in s_kets]
    images = [tensor_product(p, m) for p, m in zip(post, pointers)]
    positions = list(range(ds))
    u_domain = complete_to_unitary(domain, positions, seed_order=completion_order, tol=tol)
    u_images = complete_to_unitary(images, positions, seed_order=completion_order, tol=tol)
    interaction = u_images @ dagger(u_domain)

    worst = max(
        frobenius_norm(interaction @ d - i) for d, i in zip(domain, images)
    )
    if worst > tol.validation:
        raise ArithmeticError(f"interaction fails its defining map by {worst:.3e}")

    return MeasurementModel(
        tuple(readonly(k.copy()) for k in s_kets),
        readonly(ready.copy()),
        tuple(readonly(k.copy()) for k in pointers),
        tuple(readonly(k.copy()) for k in post),
        readonly(interaction),
    )


def _amplitudes(model: MeasurementModel, amplitudes, tol: Tolerances) -> np.ndarray:
    c = as_complex_ket(amplitudes)
    if c.size != model.system_dim:
        raise DimensionMismatch(
            f"need {model.system_dim} amplitudes, got {c.size}"
        )
    total = float(np.sum(np.abs(c) ** 2))
    if abs(total - 1.0) > tol.validation:
        raise NotNormalized(f"amplitudes have |c|^2 sum {total!r}")
    return c


def _initial_ket(model: MeasurementModel, c: np.ndarray) -> np.ndarray:
    system = np.zeros(model.system_dim, dtype=np.complex128)
    for cj, ket in zip(c, model.system_basis):
        system += cj * ket
    return tensor_product(system, model.ready_ket)


def evolved_state(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """The post-interaction ket: sum_j c_j |post_j> |M_j>."""
    c = _amplitudes(model, amplitudes, tol)
    return model.interaction @ _initial_ket(model, c)


def pointer_projector(model: MeasurementModel, k: int) -> Projector:
    """I_system (x) [M_k]: the apparatus shows outcome k."""
    ptr = model.pointer_basis[k]
    block = np.outer(ptr, ptr.conj())
    return make_projector(tensor_product(np.eye(model.system_dim), block))


def system_projector(model: MeasurementModel, j: int) -> Projector:
    """[s_j] (x) I_apparatus: the system holds basis property j."""
    ket = model.system_basis[j]
    block = np.outer(ket, ket.conj())
    return make_projector(tensor_product(block, np.eye(model.apparatus_dim)))


def pointer_pdi(
    model: MeasurementModel, tol: Tolerances = DEFAULT_TOLERANCES
) -> DecompositionOfIdentity:
    """The pointer framework, padded with the never-occupied remainder."""
    members = [pointer_projector(model, k) for k in range(model.system_dim)]
    labels = [model.pointer_label(k) for k in range(model.system_dim)]
    remainder = np.eye(model.total_dim, dtype=np.complex128)
    for m in members:
        remainder -= m.matrix
    members.append(make_projector(remainder, tol=tol))
    labels.append("rest")
    return validate_pdi(members, labels, tol=tol)


def _grid() -> tuple[float, float, float]:
    return (0.0, 1.0, 2.0)


def _propagators(model: MeasurementModel) -> tuple[np.ndarray, np.ndarray]:
    # nothing happens between preparation and the start of the interaction
    return (np.eye(model.total_dim, dtype=np.complex128), model.interaction)


def family_unitary(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[HistoryFamily, ProbabilityTable]:
    """The unitary development: one history following the evolving state."""
    c = _amplitudes(model, amplitudes, tol)
    psi0 = _initial_ket(model, c)
    psi2 = model.interaction @ psi0
    family = build_family(
        InitialCondition.pure(psi0, tol),
        _grid(),
        propagators=_propagators(model),
        events=[
            [("psi1", make_projector(psi0, tol=tol))],
            [("psi2", make_projector(psi2, tol=tol))],
        ],
        tol=tol,
    )
    return family, assign_probabilities(family, tol)


def pointer_probabilities_trace(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Pointer statistics read from the evolved state as a pre-probability:
    Tr([psi2] (I (x) [M_k]))."""
    psi2 = evolved_state(model, amplitudes, tol)
    out = np.empty(model.system_dim)
    for k in range(model.system_dim):
        out[k] = float(np.real(np.conj(psi2) @ (pointer_projector(model, k).matrix @ psi2)))
    return out


def family_pointer(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[HistoryFamily, PointerDistribution]:
    """Unitary development until the interaction, pointer outcomes after.

    The distribution is computed from the family's chain kets and
    cross-checked against the pre-probability trace route; the two must
    agree within ``tol.validation``.
    """
    c = _amplitudes(model, amplitudes, tol)
    psi0 = _initial_ket(model, c)
    labels = [model.pointer_label(k) for k in range(model.system_dim)]
    family = build_family(
        InitialCondition.pure(psi0, tol),
        _grid(),
        propagators=_propagators(model),
        events=[
            [("psi1", make_projector(psi0, tol=tol))],
            [(labels[k], pointer_projector(model, k)) for k in range(model.system_dim)],
        ],
        tol=tol,
    )
    table = assign_probabilities(family, tol)
    via_family = np.array([table.probability(f"psi1,{l}") for l in labels])
    via_trace = pointer_probabilities_trace(model, c, tol)
    gap = float(np.max(np.abs(via_family - via_trace)))
    if gap > tol.validation:
        raise ArithmeticError(
            f"chain-ket and pre-probability pointer routes disagree by {gap:.3e}"
        )
    return family, PointerDistribution(tuple(labels), readonly(via_family))


def family_retrodiction(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[HistoryFamily, ProbabilityTable]:
    """Microscopic state at t1 crossed with pointer outcomes at t2.

    The joint table carries weight |c_j|^2 exactly on the diagonal j = k;
    its zeros are data, not absences, so they stay in the table.
    """
    c = _amplitudes(model, amplitudes, tol)
    psi0 = _initial_ket(model, c)
    family = build_family(
        InitialCondition.pure(psi0, tol),
        _grid(),
        propagators=_propagators(model),
        events=[
            [
                (model.system_label(j), system_projector(model, j))
                for j in range(model.system_dim)
            ],
            [
                (model.pointer_label(k), pointer_projector(model, k))
                for k in range(model.system_dim)
            ],
        ],
        tol=tol,
    )
    return family, assign_probabilities(family, tol)


def retrodict(
    model: MeasurementModel,
    amplitudes,
    pointer: int,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Probabilities of the earlier system properties given pointer outcome k.

    Raises ZeroConditioningEvent when the pointer outcome has (numerically)
    zero probability.
    """
    k = int(pointer)
    if not 0 <= k < model.system_dim:
        raise ValueError(f"pointer index must lie in 0..{model.system_dim - 1}")
    _, table = family_retrodiction(model, amplitudes, tol)
    given = [
        f"{model.system_label(j)},{model.pointer_label(k)}"
        for j in range(model.system_dim)
    ]
    out = np.empty(model.system_dim)
    for j in range(model.system_dim):
        target = [f"{model.system_label(j)},{model.pointer_label(k)}"]
        out[j] = conditional_probability(table, given, target, tol)
    return out


def refine_by_pointer(
    model: MeasurementModel, amplitudes, tol: Tolerances = DEFAULT_TOLERANCES
) -> DecompositionOfIdentity:
    """Refine the unitary-development framework at t2 by the pointer framework.

    Succeeds only when the evolved state projector commutes with every
    pointer projector, i.e. when at most one amplitude is nonzero;
    otherwise IncompatibleError propagates.
    """
    psi2 = evolved_state(model, amplitudes, tol)
    p2 = make_projector(psi2, tol=tol)
    unitary_view = validate_pdi([p2, negation(p2, tol)], ["psi2", "rest"], tol=tol)
    return common_refinement(unitary_view, pointer_pdi(model, tol), tol=tol)
