import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsim.hilbert import (
    ModeSpec,
    annihilation_op,
    basis_state,
    embed_op,
    embed_product,
    excitation_capped_basis,
    full_tensor_op,
    number_op,
    project_full,
)


def test_mode_dim_must_be_at_least_two():
    with pytest.raises(ValueError):
        ModeSpec("q", 1)


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError):
        excitation_capped_basis([ModeSpec("q", 3), ModeSpec("q", 3)])


def test_capped_size_matches_brute_force_count():
    space = excitation_capped_basis([ModeSpec(x, 5) for x in ("q0", "c", "q1")], cap=5)
    brute = sum(1 for occ in itertools.product(range(5), repeat=3) if sum(occ) <= 5)
    # 56 tuples with sum <= 5, minus the three holding a 5 (outside dim 5)
    assert space.size == brute == 53


def test_cap_one_three_modes():
    space = excitation_capped_basis([ModeSpec(x, 5) for x in ("a", "b", "c")], cap=1)
    assert space.size == 4
    n = embed_op(space, 1, number_op(5))
    np.testing.assert_array_equal(np.diag(n), [occ[1] for occ in space.basis])


def test_cap_zero_is_vacuum_only():
    space = excitation_capped_basis([ModeSpec("a", 3), ModeSpec("b", 3)], cap=0)
    assert space.basis == [(0, 0)] or tuple(space.basis) == ((0, 0),)


def test_distinct_mode_operators_commute():
    space = excitation_capped_basis([ModeSpec("a", 4), ModeSpec("b", 3)])
    a = embed_op(space, 0, annihilation_op(4))
    b = embed_op(space, 1, annihilation_op(3) + annihilation_op(3).T)
    assert np.linalg.norm(a @ b - b @ a) < 1e-12


def test_cap_none_keeps_full_space():
    space = excitation_capped_basis([ModeSpec("a", 3), ModeSpec("b", 4)])
    assert space.size == 12
    assert space.basis[0] == (0, 0) and space.basis[-1] == (2, 3)


def test_ladder_algebra():
    a = annihilation_op(6)
    ad = a.conj().T
    np.testing.assert_allclose(ad @ a, number_op(6))
    comm = a @ ad - ad @ a
    expected = np.eye(6)
    expected[-1, -1] = -5  # truncation edge
    np.testing.assert_allclose(comm, expected, atol=1e-14)


def test_basis_state_and_index():
    space = excitation_capped_basis([ModeSpec("a", 3), ModeSpec("b", 3)], cap=2)
    psi = basis_state(space, (1, 1))
    assert psi[space.index((1, 1))] == 1 and np.sum(np.abs(psi)) == 1
    assert (2, 1) not in space
    with pytest.raises(KeyError):
        space.index((2, 1))


def test_embed_shape_mismatch():
    space = excitation_capped_basis([ModeSpec("a", 3)])
    with pytest.raises(ValueError):
        embed_op(space, 0, annihilation_op(4))
    with pytest.raises(IndexError):
        embed_op(space, 1, annihilation_op(3))


@st.composite
def spaces_and_ops(draw):
    n_modes = draw(st.integers(1, 3))
    dims = [draw(st.integers(2, 4)) for _ in range(n_modes)]
    cap = draw(st.one_of(st.none(), st.integers(0, sum(d - 1 for d in dims))))
    chosen = draw(st.lists(st.integers(0, n_modes - 1), min_size=1, max_size=n_modes, unique=True))
    seed = draw(st.integers(0, 2**31 - 1))
    return dims, cap, chosen, seed


@settings(max_examples=40, deadline=None)
@given(spaces_and_ops())
def test_embedding_equals_restricted_kronecker(case):
    dims, cap, chosen, seed = case
    rng = np.random.default_rng(seed)
    space = excitation_capped_basis([ModeSpec(f"m{i}", d) for i, d in enumerate(dims)], cap)
    factors = {i: rng.normal(size=(dims[i], dims[i])) + 1j * rng.normal(size=(dims[i], dims[i])) for i in chosen}
    direct = embed_product(space, factors)
    via_full = project_full(space, full_tensor_op(dims, factors))
    np.testing.assert_allclose(direct, via_full, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 6))
def test_embedded_hermitian_stays_hermitian(d1, d2, cap):
    space = excitation_capped_basis([ModeSpec("a", d1), ModeSpec("b", d2)], cap)
    a = annihilation_op(d1)
    b = annihilation_op(d2)
    hop = embed_product(space, {0: a, 1: b.conj().T})
    h = hop + hop.conj().T + embed_op(space, 0, number_op(d1))
    np.testing.assert_allclose(h, h.conj().T, atol=0)
