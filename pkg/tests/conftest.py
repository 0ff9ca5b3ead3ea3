"""Shared helpers: seeded random states, unitaries and frameworks.

Randomness always flows through a generator the test seeds itself, so
every run sees the same draws.  The unitaries come from numpy's QR with
the R-diagonal phase fix, independent of the library under test.

The hooks at the bottom repeat the acceptance-suite outcomes as a final
summary section, one line per criterion.
"""

import numpy as np

import qhistories as qh

_ACCEPTANCE_OUTCOMES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    _ACCEPTANCE_OUTCOMES[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_OUTCOMES):
        verdict = "PASS" if _ACCEPTANCE_OUTCOMES[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")

SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)

KET_Z_PLUS = np.array([1, 0], dtype=np.complex128)
KET_Z_MINUS = np.array([0, 1], dtype=np.complex128)
KET_X_PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)
KET_X_MINUS = np.array([1, -1], dtype=np.complex128) / np.sqrt(2)


def random_ket(gen, dim):
    v = gen.normal(size=dim) + 1j * gen.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(gen, dim):
    a = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    return (a + a.conj().T) / 2.0


def random_unitary(gen, dim):
    a = gen.normal(size=(dim, dim)) + 1j * gen.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pdi(gen, dim):
    """Random framework: unitary columns grouped into random-size blocks."""
    u = random_unitary(gen, dim)
    sizes = []
    left = dim
    while left > 0:
        take = int(gen.integers(1, left + 1))
        sizes.append(take)
        left -= take
    if len(sizes) == 1 and dim > 1:
        sizes = [1, dim - 1]
    members = []
    start = 0
    for size in sizes:
        block = u[:, start:start + size]
        members.append(qh.make_projector(block @ block.conj().T))
        start += size
    return qh.validate_pdi(members)


def basis_pdi(dim, labels=None):
    eye = np.eye(dim, dtype=np.complex128)
    members = [qh.make_projector(eye[:, j]) for j in range(dim)]
    return qh.validate_pdi(members, labels)
