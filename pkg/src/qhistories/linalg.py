"""Dense complex linear algebra kernels used by every other module.

Kets and operators are plain numpy arrays with ``complex128`` entries.  All
functions are pure: they never mutate their arguments, and arrays stored in
result objects are marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoConvergence, NotHermitian, NotOrthonormal

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "STRICT_TOLERANCES",
    "EigenSystem",
    "tensor_product",
    "hermitian_eigendecomposition",
    "unitary_from_hamiltonian",
    "complete_to_unitary",
    "frobenius_norm",
    "dagger",
    "is_unitary",
]

#: hard cap on cyclic Jacobi sweeps before giving up
JACOBI_SWEEP_CAP = 100

#: residual norm below which a Gram-Schmidt seed is considered spent
_GS_RESIDUAL_FLOOR = 1e-6


@dataclass(frozen=True)
class Tolerances:
    """Central numerical thresholds; pass a custom instance to tighten them.

    validation
        structural checks: hermiticity, unitarity, orthonormality,
        projector idempotence, completeness of decompositions.
    convergence
        iterative targets, and the floor below which a probability weight
        is snapped to exactly zero.
    consistency
        largest tolerated Gram off-diagonal magnitude.
    """

    validation: float = 1e-10
    convergence: float = 1e-12
    consistency: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()
STRICT_TOLERANCES = Tolerances(validation=1e-11, convergence=1e-13, consistency=1e-9)


def readonly(a: np.ndarray) -> np.ndarray:
    """Mark an array immutable and hand it back."""
    a.setflags(write=False)
    return a


def as_complex_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got an array of rank {m.ndim}")
    return m


def as_complex_ket(v) -> np.ndarray:
    k = np.asarray(v, dtype=np.complex128)
    if k.ndim != 1 or k.size == 0:
        raise ValueError("expected a nonempty one-dimensional array")
    return k


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(a))


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_defect(a: np.ndarray) -> float:
    """Frobenius distance from the adjoint, relative to max(1, ||a||)."""
    return frobenius_norm(a - dagger(a)) / max(1.0, frobenius_norm(a))


def is_unitary(u, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    m = as_complex_matrix(u)
    if m.shape[0] != m.shape[1]:
        return False
    return frobenius_norm(dagger(m) @ m - np.eye(m.shape[0])) <= tol.validation


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product of two kets or two matrices.

    For matrices, block (i, j) of the result equals ``a[i, j] * b``, so the
    result has shape (rows_a * rows_b, cols_a * cols_b).
    """
    x = np.asarray(a, dtype=np.complex128)
    y = np.asarray(b, dtype=np.complex128)
    if x.ndim not in (1, 2) or y.ndim not in (1, 2):
        raise ValueError("tensor_product operands must be kets or matrices")
    if x.ndim != y.ndim:
        raise ValueError("tensor_product operands must have the same rank")
    return np.kron(x, y)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral data of a Hermitian operator.

    ``eigenvalues`` is real and sorted in descending order; column j of
    ``eigenvectors`` is the unit eigenvector for ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def _canonical_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant entry is real positive."""
    out = vectors.copy()
    n = out.shape[0]
    for j in range(out.shape[1]):
        col = out[:, j]
        floor = 1e-12 * max(1.0, float(np.abs(col).max()))
        for k in range(n):
            mag = abs(col[k])
            if mag > floor:
                out[:, j] = col * (col[k].conjugate() / mag)
                break
    return out


def _lex_key(column: np.ndarray):
    return tuple((round(float(z.real), 12), round(float(z.imag), 12)) for z in column)


def _canonical_order(values: np.ndarray, vectors: np.ndarray) -> list[int]:
    """Descending eigenvalue order; near-ties broken by eigenvector lex key."""
    order = sorted(range(values.size), key=lambda i: -values[i])
    spread = float(values.max() - values.min()) if values.size else 0.0
    tie = 1e-12 * max(1.0, spread)
    result: list[int] = []
    group: list[int] = []
    for idx in order:
        if group and values[group[0]] - values[idx] > tie:
            group.sort(key=lambda i: _lex_key(vectors[:, i]))
            result.extend(group)
            group = []
        group.append(idx)
    group.sort(key=lambda i: _lex_key(vectors[:, i]))
    result.extend(group)
    return result


def hermitian_eigendecomposition(h, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenSystem:
    """Diagonalize a Hermitian matrix with cyclic complex Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``tol.convergence * ||h||_F``; more than ``JACOBI_SWEEP_CAP`` sweeps
    raises NoConvergence.  Eigenvalues come back in descending order with
    phase-canonicalized eigenvectors, so the output is deterministic.
    """
    m = as_complex_matrix(h)
    n, ncols = m.shape
    if n != ncols:
        raise NotHermitian(f"matrix is {n}x{ncols}, not square")
    defect = hermiticity_defect(m)
    if defect > tol.validation:
        raise NotHermitian(
            f"hermiticity defect {defect:.3e} exceeds tolerance {tol.validation:.1e}"
        )

    a = (m + dagger(m)) / 2.0
    v = np.eye(n, dtype=np.complex128)
    scale = frobenius_norm(a)
    if scale == 0.0:
        return EigenSystem(readonly(np.zeros(n)), readonly(v))
    target = tol.convergence * scale
    skip = target / max(1, n)

    for sweep in range(JACOBI_SWEEP_CAP + 1):
        off = frobenius_norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        if sweep == JACOBI_SWEEP_CAP:
            raise NoConvergence(
                f"jacobi sweeps exceeded {JACOBI_SWEEP_CAP} "
                f"(off-diagonal norm {off:.3e})"
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= skip:
                    continue
                conj_phase = (apq / r).conjugate()
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot = np.array(
                    [[c, s], [-s * conj_phase, c * conj_phase]], dtype=np.complex128
                )
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = dagger(rot) @ a[idx, :]
                a[p, q] = 0.0
                a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ rot

    values = np.diag(a).real.copy()
    vectors = _canonical_phases(v)
    order = _canonical_order(values, vectors)
    return EigenSystem(readonly(values[order]), readonly(vectors[:, order]))


def unitary_from_hamiltonian(
    h, dt: float, hbar: float = 1.0, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Propagator exp(-i h dt / hbar) via the spectral decomposition."""
    if not np.isfinite(dt):
        raise ValueError("time step must be finite")
    if not (hbar > 0.0 and np.isfinite(hbar)):
        raise ValueError("hbar must be positive and finite")
    eig = hermitian_eigendecomposition(h, tol)
    phases = np.exp(-1j * eig.eigenvalues * (float(dt) / float(hbar)))
    return (eig.eigenvectors * phases) @ dagger(eig.eigenvectors)


def complete_to_unitary(
    columns: Sequence,
    positions: Sequence[int],
    seed_order: Sequence[int] | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Extend orthonormal columns at the given indices to a full unitary.

    The supplied columns are copied into place verbatim.  Free columns are
    filled in ascending index order by Gram-Schmidt, seeded from standard
    basis vectors taken in ``seed_order`` (natural order by default), which
    makes the completion deterministic.
    """
    cols = [as_complex_ket(c) for c in columns]
    if not cols:
        raise ValueError("need at least one column")
    d = cols[0].size
    if any(c.size != d for c in cols):
        raise ValueError("columns must share one dimension")
    pos = [int(p) for p in positions]
    if len(pos) != len(cols):
        raise ValueError("one position per column required")
    if len(set(pos)) != len(pos) or any(p < 0 or p >= d for p in pos):
        raise ValueError("positions must be distinct indices in range")
    if len(cols) > d:
        raise NotOrthonormal(f"{len(cols)} columns cannot be orthonormal in dimension {d}")

    stacked = np.column_stack(cols)
    gram_defect = frobenius_norm(dagger(stacked) @ stacked - np.eye(len(cols)))
    if gram_defect > tol.validation:
        raise NotOrthonormal(
            f"columns are not orthonormal (gram defect {gram_defect:.3e})"
        )

    if seed_order is None:
        seeds = list(range(d))
    else:
        seeds = [int(k) for k in seed_order]
        if sorted(seeds) != list(range(d)):
            raise ValueError("seed_order must be a permutation of the basis indices")

    u = np.zeros((d, d), dtype=np.complex128)
    for p, c in zip(pos, cols):
        u[:, p] = c
    accepted = list(cols)
    seed_iter = iter(seeds)
    for p in sorted(set(range(d)) - set(pos)):
        while True:
            k = next(seed_iter, None)
            if k is None:
                raise NotOrthonormal("completion exhausted the seed basis")
            vec = np.zeros(d, dtype=np.complex128)
            vec[k] = 1.0
            for _ in range(2):  # second pass keeps the set orthonormal to machine precision
                for b in accepted:
                    vec = vec - b * (np.conj(b) @ vec)
            nrm = float(np.linalg.norm(vec))
            if nrm > _GS_RESIDUAL_FLOOR:
                vec = vec / nrm
                accepted.append(vec)
                u[:, p] = vec
                break
    return u
