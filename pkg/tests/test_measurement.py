"""Measurement models: unitary interaction, pointer statistics, retrodiction."""

import numpy as np
import pytest

import qhistories as qh
from qhistories.errors import (
    DimensionMismatch,
    IncompatibleError,
    NotNormalized,
    NotOrthonormal,
    PointerOverlapsReady,
    ZeroConditioningEvent,
)

from conftest import random_ket, random_unitary

E2 = np.eye(2, dtype=np.complex128)
E3 = np.eye(3, dtype=np.complex128)


def simple_model(**kwargs):
    return qh.build_measurement_model(
        [E2[:, 0], E2[:, 1]], E3[:, 0], [E3[:, 1], E3[:, 2]], **kwargs
    )


def random_model(gen, ds, completion_order=None):
    us = random_unitary(gen, ds)
    um = random_unitary(gen, ds + 1)
    system = [us[:, j] for j in range(ds)]
    ready = um[:, 0]
    pointers = [um[:, k + 1] for k in range(ds)]
    return qh.build_measurement_model(
        system, ready, pointers, completion_order=completion_order
    )


def random_amplitudes(gen, ds):
    c = gen.normal(size=ds) + 1j * gen.normal(size=ds)
    return c / np.linalg.norm(c)


def test_model_dimensions_and_labels():
    model = simple_model()
    assert model.system_dim == 2
    assert model.apparatus_dim == 3
    assert model.total_dim == 6
    assert model.pointer_label(0) == "M1"
    assert model.system_label(1) == "s2"


def test_defining_map():
    gen = np.random.default_rng(401)
    for ds in (2, 3):
        model = random_model(gen, ds)
        np.testing.assert_allclose(
            model.interaction.conj().T @ model.interaction,
            np.eye(model.total_dim),
            atol=1e-12,
        )
        for j in range(ds):
            lhs = model.interaction @ qh.tensor_product(
                model.system_basis[j], model.ready_ket
            )
            rhs = qh.tensor_product(model.post_states[j], model.pointer_basis[j])
            np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_model_validation():
    with pytest.raises(DimensionMismatch):
        # apparatus too small to hold ready + both pointers
        qh.build_measurement_model([E2[:, 0], E2[:, 1]], E2[:, 0], [E2[:, 1], E2[:, 0]])
    with pytest.raises(PointerOverlapsReady):
        qh.build_measurement_model(
            [E2[:, 0], E2[:, 1]], E3[:, 0], [E3[:, 0], E3[:, 2]]
        )
    with pytest.raises(NotOrthonormal):
        qh.build_measurement_model(
            [E2[:, 0], (E2[:, 0] + E2[:, 1]) / np.sqrt(2)],
            E3[:, 0],
            [E3[:, 1], E3[:, 2]],
        )
    with pytest.raises(DimensionMismatch):
        qh.build_measurement_model([E2[:, 0], E2[:, 1]], E3[:, 0], [E3[:, 1]])
    with pytest.raises(NotOrthonormal):
        simple_model(post_states=[2.0 * E2[:, 0], E2[:, 1]])
    with pytest.raises(DimensionMismatch):
        simple_model(post_states=[E3[:, 0], E3[:, 1]])


def test_amplitude_validation():
    model = simple_model()
    with pytest.raises(NotNormalized):
        qh.evolved_state(model, (1.0, 1.0))
    with pytest.raises(DimensionMismatch):
        qh.evolved_state(model, (1.0, 0.0, 0.0))


def test_evolved_state_expansion():
    # |psi2> = sum_j c_j |post_j>|M_j>
    gen = np.random.default_rng(402)
    model = random_model(gen, 3)
    c = random_amplitudes(gen, 3)
    expected = np.zeros(model.total_dim, dtype=np.complex128)
    for j in range(3):
        expected += c[j] * qh.tensor_product(
            model.post_states[j], model.pointer_basis[j]
        )
    np.testing.assert_allclose(qh.evolved_state(model, c), expected, atol=1e-10)


def test_pointer_pdi_structure():
    model = simple_model()
    pdi = qh.pointer_pdi(model)
    assert pdi.labels == ("M1", "M2", "rest")
    assert [p.rank for p in pdi.projectors] == [2, 2, 2]


def test_family_unitary_single_history():
    model = simple_model()
    family, table = qh.family_unitary(model, (0.6, 0.8))
    assert family.labels == ("psi1,psi2",)
    assert table.probability("psi1,psi2") == pytest.approx(1.0, abs=1e-12)


def test_pointer_distribution_both_routes():
    model = simple_model()
    c = (np.sqrt(0.3), np.sqrt(0.7))
    family, dist = qh.family_pointer(model, c)
    np.testing.assert_allclose(dist.probabilities, [0.3, 0.7], atol=1e-12)
    np.testing.assert_allclose(
        qh.pointer_probabilities_trace(model, c), [0.3, 0.7], atol=1e-12
    )
    assert dist.labels == ("M1", "M2")
    assert family.labels == ("psi1,M1", "psi1,M2")


def test_joint_table_is_diagonal():
    gen = np.random.default_rng(403)
    for ds in (2, 3, 4):
        model = random_model(gen, ds)
        c = random_amplitudes(gen, ds)
        _, table = qh.family_retrodiction(model, c)
        for j in range(ds):
            for k in range(ds):
                label = f"{model.system_label(j)},{model.pointer_label(k)}"
                value = table.probability(label)
                if j == k:
                    assert value == pytest.approx(abs(c[j]) ** 2, abs=1e-9)
                else:
                    assert value == 0.0


def test_joint_marginals_match_pointer_distribution():
    gen = np.random.default_rng(404)
    model = random_model(gen, 3)
    c = random_amplitudes(gen, 3)
    family, table = qh.family_retrodiction(model, c)
    _, dist = qh.family_pointer(model, c)
    marginal = dict(qh.marginal_distribution(table, 2))
    for label, p in dist.as_pairs():
        assert marginal[label] == pytest.approx(p, abs=1e-9)
    del family


def test_retrodiction_is_exact_delta():
    gen = np.random.default_rng(405)
    model = random_model(gen, 3)
    c = random_amplitudes(gen, 3)
    for k in range(3):
        values = qh.retrodict(model, c, k)
        for j in range(3):
            assert values[j] == (1.0 if j == k else 0.0)


def test_retrodict_zero_pointer_outcome():
    model = simple_model()
    with pytest.raises(ZeroConditioningEvent):
        qh.retrodict(model, (1.0, 0.0), 1)
    with pytest.raises(ValueError):
        qh.retrodict(model, (1.0, 0.0), 5)


def test_completion_order_cannot_change_statistics():
    gen = np.random.default_rng(406)
    base = random_model(np.random.default_rng(406), 2)
    orders = [(5, 4, 3, 2, 1, 0), (2, 0, 4, 1, 5, 3)]
    c = random_amplitudes(gen, 2)
    reference = qh.pointer_probabilities_trace(base, c)
    for order in orders:
        model = random_model(np.random.default_rng(406), 2, completion_order=order)
        # the defining images agree even if the free columns differ
        for j in range(2):
            np.testing.assert_allclose(
                model.interaction @ qh.tensor_product(model.system_basis[j], model.ready_ket),
                base.interaction @ qh.tensor_product(base.system_basis[j], base.ready_ket),
                atol=1e-10,
            )
        np.testing.assert_allclose(
            qh.pointer_probabilities_trace(model, c), reference, atol=1e-12
        )


def test_post_states_cannot_change_pointer_statistics():
    gen = np.random.default_rng(407)
    us = random_unitary(gen, 2)
    um = random_unitary(gen, 3)
    system = [us[:, 0], us[:, 1]]
    ready, pointers = um[:, 0], [um[:, 1], um[:, 2]]
    c = random_amplitudes(gen, 2)
    default = qh.build_measurement_model(system, ready, pointers)
    scrambled = qh.build_measurement_model(
        system, ready, pointers, post_states=[random_ket(gen, 2), random_ket(gen, 2)]
    )
    np.testing.assert_allclose(
        qh.pointer_probabilities_trace(scrambled, c),
        qh.pointer_probabilities_trace(default, c),
        atol=1e-12,
    )
    _, dist = qh.family_pointer(scrambled, c)
    np.testing.assert_allclose(
        dist.probabilities, qh.pointer_probabilities_trace(default, c), atol=1e-12
    )


def test_refine_by_pointer_superposition_incompatible():
    gen = np.random.default_rng(408)
    for ds in (2, 3):
        model = random_model(gen, ds)
        c = random_amplitudes(gen, ds)  # generically all-nonzero
        assert np.min(np.abs(c)) > 1e-6
        with pytest.raises(IncompatibleError):
            qh.refine_by_pointer(model, c)


def test_refine_by_pointer_single_branch_succeeds():
    model = simple_model()
    refined = qh.refine_by_pointer(model, (0.0, 1.0))
    assert "psi2∧M2" in refined.labels
    assert sum(p.rank for p in refined.projectors) == model.total_dim
