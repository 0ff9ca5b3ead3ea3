"""Information carried by quantum channels, and the bounds that cap it.

Entropies are measured in bits.  The channel experiment prepares one of
several states with known priors, measures a framework on it, and compares
the extracted mutual information against the Holevo quantity and the
log2(d) ceiling.  The dense coding demo saturates 2 log2(d) bits with one
transmitted qudit by spending shared entanglement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NotDensityMatrix, NotNormalized
from .linalg import (
    DEFAULT_TOLERANCES,
    Tolerances,
    as_complex_matrix,
    dagger,
    frobenius_norm,
    hermitian_eigendecomposition,
    readonly,
    tensor_product,
)
from .properties import DecompositionOfIdentity, make_projector, validate_pdi

__all__ = [
    "Ensemble",
    "ChannelReport",
    "DenseCodingReport",
    "shannon_entropy",
    "mutual_information",
    "von_neumann_entropy",
    "holevo_chi",
    "make_ensemble",
    "channel_experiment",
    "bell_basis_pdi",
    "dense_coding_demo",
]

#: slack on probability normalization sums
_NORMALIZATION_SLACK = 1e-9

#: slack when asserting the information chain I <= chi <= log2 d
_BOUND_SLACK = 1e-9

#: window for declaring the log2(d) bound achieved
_ACHIEVE_WINDOW = 1e-6


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Preparation states with prior probabilities."""

    members: tuple[tuple[float, np.ndarray], ...]

    @property
    def dim(self) -> int:
        return self.members[0][1].shape[0]

    @property
    def priors(self) -> np.ndarray:
        return np.array([p for p, _ in self.members])

    def average_state(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for prior, rho in self.members:
            out += prior * rho
        return out


@dataclass(frozen=True)
class ChannelReport:
    mutual_information_bits: float
    bound_bits: float
    holevo_bits: float
    achieves_bound: bool


@dataclass(frozen=True, eq=False)
class DenseCodingReport:
    dimension: int
    messages: int
    bits: float
    qudits: int
    per_qudit_bound_bits: float
    bound_respected: bool
    basis: DecompositionOfIdentity
    channel: ChannelReport


def _as_distribution(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise NotNormalized("expected a nonempty one-dimensional distribution")
    if float(p.min()) < -1e-12:
        raise NotNormalized(f"negative probability {p.min()!r}")
    p = np.clip(p, 0.0, None)
    total = float(p.sum())
    if abs(total - 1.0) > _NORMALIZATION_SLACK:
        raise NotNormalized(f"probabilities sum to {total!r}")
    return p


def _entropy_bits(p: np.ndarray) -> float:
    positive = p[p > 0.0]
    return float(-(positive * np.log2(positive)).sum())


def shannon_entropy(probabilities) -> float:
    """H(p) in bits; 0 log 0 reads as 0."""
    return _entropy_bits(_as_distribution(probabilities))


def mutual_information(joint) -> float:
    """I(A:B) = H(A) + H(B) - H(A,B) of a joint distribution (rows = A)."""
    j = np.asarray(joint, dtype=float)
    if j.ndim != 2 or j.size == 0:
        raise NotNormalized("expected a nonempty two-dimensional joint distribution")
    if float(j.min()) < -1e-12:
        raise NotNormalized(f"negative joint probability {j.min()!r}")
    j = np.clip(j, 0.0, None)
    total = float(j.sum())
    if abs(total - 1.0) > _NORMALIZATION_SLACK:
        raise NotNormalized(f"joint probabilities sum to {total!r}")
    h_a = _entropy_bits(j.sum(axis=1))
    h_b = _entropy_bits(j.sum(axis=0))
    h_ab = _entropy_bits(j.reshape(-1))
    return h_a + h_b - h_ab


def _validated_density(rho, tol: Tolerances) -> np.ndarray:
    r = as_complex_matrix(rho)
    if r.shape[0] != r.shape[1]:
        raise NotDensityMatrix("density matrix must be square")
    scale = max(1.0, frobenius_norm(r))
    if frobenius_norm(r - dagger(r)) > tol.validation * scale:
        raise NotDensityMatrix("density matrix is not hermitian")
    if abs(float(r.trace().real) - 1.0) > tol.validation:
        raise NotDensityMatrix(f"density matrix has trace {r.trace()!r}")
    return (r + dagger(r)) / 2.0


def von_neumann_entropy(rho, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """S(rho) = -Tr rho log2 rho via the spectral decomposition.

    Eigenvalues are clamped into [0, 1] before taking logs; anything below
    -``tol.validation`` fails the density-matrix check instead.
    """
    r = _validated_density(rho, tol)
    eig = hermitian_eigendecomposition(r, tol)
    if float(eig.eigenvalues.min()) < -tol.validation:
        raise NotDensityMatrix(
            f"density matrix has negative eigenvalue {eig.eigenvalues.min():.3e}"
        )
    lam = np.clip(eig.eigenvalues, 0.0, 1.0)
    return _entropy_bits(lam)


def make_ensemble(members, tol: Tolerances = DEFAULT_TOLERANCES) -> Ensemble:
    """Validate (prior, state) pairs; kets become their ray densities."""
    pairs = list(members)
    if not pairs:
        raise NotNormalized("an ensemble needs at least one member")
    priors = _as_distribution([p for p, _ in pairs])
    states = []
    for _, state in pairs:
        arr = np.asarray(state, dtype=np.complex128)
        if arr.ndim == 1:
            states.append(make_projector(arr, tol=tol).matrix)
        else:
            states.append(readonly(_validated_density(arr, tol)))
    dim = states[0].shape[0]
    if any(s.shape[0] != dim for s in states):
        raise DimensionMismatch("ensemble members live on different dimensions")
    return Ensemble(tuple((float(p), s) for p, s in zip(priors, states)))


def holevo_chi(ensemble: Ensemble, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """chi = S(sum p_i rho_i) - sum p_i S(rho_i)."""
    avg = von_neumann_entropy(ensemble.average_state(), tol)
    parts = sum(
        prior * von_neumann_entropy(rho, tol)
        for prior, rho in ensemble.members
        if prior > 0.0
    )
    return avg - parts


def channel_experiment(
    d: int,
    ensemble: Ensemble,
    measurement: DecompositionOfIdentity,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ChannelReport:
    """Prepare-with-priors, measure-a-framework, score the information.

    Joint distribution P(a, b) = p_a Tr(rho_a Q_b).  The report asserts the
    chain I <= chi <= log2 d (a bound violation means a numerical bug, so
    it raises rather than reporting nonsense).
    """
    d = int(d)
    if d < 1:
        raise DimensionMismatch("dimension must be positive")
    if ensemble.dim != d:
        raise DimensionMismatch(f"ensemble dimension {ensemble.dim} != {d}")
    if measurement.dim != d:
        raise DimensionMismatch(f"measurement dimension {measurement.dim} != {d}")
    joint = np.empty((len(ensemble.members), len(measurement.projectors)))
    for a, (prior, rho) in enumerate(ensemble.members):
        for b, q in enumerate(measurement.projectors):
            joint[a, b] = prior * float(np.real(np.trace(rho @ q.matrix)))
    info = mutual_information(joint)
    chi = holevo_chi(ensemble, tol)
    bound = float(np.log2(d))
    if info > chi + _BOUND_SLACK or chi > bound + _BOUND_SLACK:
        raise ArithmeticError(
            f"information chain violated: I={info!r}, chi={chi!r}, log2 d={bound!r}"
        )
    return ChannelReport(
        mutual_information_bits=info,
        bound_bits=bound,
        holevo_bits=chi,
        achieves_bound=abs(info - bound) <= _ACHIEVE_WINDOW,
    )


def _shift_matrix(d: int) -> np.ndarray:
    x = np.zeros((d, d), dtype=np.complex128)
    for j in range(d):
        x[(j + 1) % d, j] = 1.0
    return x


def _phase_matrix(d: int) -> np.ndarray:
    omega = np.exp(2j * np.pi / d)
    return np.diag(omega ** np.arange(d))


def bell_basis_pdi(
    d: int, tol: Tolerances = DEFAULT_TOLERANCES
) -> DecompositionOfIdentity:
    """The d*d fully entangled basis of two qudits as a framework.

    Member (m, n) projects onto (shift^m phase^n (x) I) applied to the
    maximally entangled pair; labels are ``B{m}{n}``.
    """
    d = int(d)
    if d < 2:
        raise DimensionMismatch("entangled pairs need dimension at least 2")
    phi = np.zeros(d * d, dtype=np.complex128)
    for j in range(d):
        phi[j * d + j] = 1.0
    phi /= np.sqrt(d)
    shift = _shift_matrix(d)
    phase = _phase_matrix(d)
    eye = np.eye(d, dtype=np.complex128)
    members = []
    labels = []
    x_power = np.eye(d, dtype=np.complex128)
    for m in range(d):
        for n in range(d):
            coder = x_power @ np.linalg.matrix_power(phase, n)
            ket = tensor_product(coder, eye) @ phi
            members.append(make_projector(ket, tol=tol))
            labels.append(f"B{m}{n}")
        x_power = shift @ x_power
    return validate_pdi(members, labels, tol=tol)


def dense_coding_demo(d: int, tol: Tolerances = DEFAULT_TOLERANCES) -> DenseCodingReport:
    """Send 2 log2(d) bits with one transmitted qudit plus shared entanglement.

    Encodes d*d equiprobable messages as the fully entangled basis states
    and measures the same basis, so the channel achieves its full
    2 log2(d) capacity while each qudit alone still respects log2(d).
    """
    d = int(d)
    if not 2 <= d <= 8:
        raise ValueError(f"dimension must lie in 2..8, got {d}")
    basis = bell_basis_pdi(d, tol)
    prior = 1.0 / (d * d)
    ensemble = make_ensemble(
        [(prior, p.matrix) for p in basis.projectors], tol=tol
    )
    channel = channel_experiment(d * d, ensemble, basis, tol=tol)
    per_qudit = float(np.log2(d))
    return DenseCodingReport(
        dimension=d,
        messages=d * d,
        bits=2.0 * per_qudit,
        qudits=2,
        per_qudit_bound_bits=per_qudit,
        bound_respected=channel.mutual_information_bits <= 2.0 * per_qudit + _BOUND_SLACK,
        basis=basis,
        channel=channel,
    )
