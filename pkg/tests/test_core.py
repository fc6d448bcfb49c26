from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from specgap.core import (ChainSpec, ExactScalar, LocalTerm, ResourceError, assemble, assemble_exact,
                          basis_digits, cyclic_shift_operator, digits_to_index, edge_laplacian,
                          identity_term, index_to_digits, operator_norm_bound, projector)

fractions = st.fractions(min_value=-8, max_value=8, max_denominator=16)
phases = st.fractions(min_value=-3, max_value=3, max_denominator=8)
scalars = st.builds(ExactScalar, fractions, fractions, phases)


@given(scalars)
def test_phase_is_folded_into_unit_interval(x):
    assert 0 <= x.phase < 1
    assert complex(x) == pytest.approx(complex(ExactScalar(x.rational, x.sqrt2, x.phase + 2)), abs=1e-9)


@given(scalars, scalars)
def test_product_matches_complex_product(a, b):
    assert complex(a * b) == pytest.approx(complex(a) * complex(b), abs=1e-9)


@given(scalars)
def test_conjugate_and_json_roundtrip(x):
    assert complex(x.conjugate()) == pytest.approx(complex(x).conjugate(), abs=1e-12)
    assert ExactScalar.from_json(x.to_json()) == x


def test_sum_across_phases_is_rejected():
    with pytest.raises(ValueError):
        ExactScalar(1, 0, Fraction(1, 3)) + ExactScalar(1)


def test_float_input_rejected():
    with pytest.raises(TypeError):
        ExactScalar(0.5)


@given(st.integers(1, 5), st.integers(2, 4), st.data())
def test_digit_roundtrip(N, d, data):
    i = data.draw(st.integers(0, d**N - 1))
    assert digits_to_index(index_to_digits(i, N, d), d) == i
    assert tuple(basis_digits(N, d)[i]) == index_to_digits(i, N, d)


def _random_term(seed, d, k):
    rng = np.random.default_rng(seed)
    a = rng.integers(-3, 4, size=(d**k, d**k))
    return LocalTerm.from_array(a + a.T, k, "rand")


def _kron_oracle(spec):
    d, N = spec.local_dim, spec.N
    total = np.zeros((d**N, d**N), dtype=complex)
    for t in spec.terms:
        for s in range(1, N - t.arity + 2):
            total += np.kron(np.kron(np.eye(d ** (s - 1)), t.dense), np.eye(d ** (N - s - t.arity + 1)))
    return total


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3), st.integers(1, 3), st.integers(3, 5))
def test_assemble_matches_kron_oracle(seed, d, k, N):
    spec = ChainSpec(d, (_random_term(seed, d, k),), "open", N)
    np.testing.assert_allclose(assemble(spec).toarray(), _kron_oracle(spec))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 3), st.integers(2, 3), st.integers(3, 5))
def test_periodic_assembly_is_translation_covariant(seed, d, k, N):
    spec = ChainSpec(d, (_random_term(seed, d, k),), "periodic", N)
    h = assemble(spec).matrix
    S = cyclic_shift_operator(N, d)
    assert abs(S @ h @ S.T - h).max() == 0


def test_exact_assembly_agrees_with_float():
    spec = ChainSpec(3, (edge_laplacian(3, (0, 1), (1, 0), weight=Fraction(1, 2)),
                         projector(3, (2,), weight=-4), identity_term(3, 2, Fraction(-7, 2))), "open", 4)
    ex = assemble_exact(spec)
    dense = np.zeros((81, 81), dtype=complex)
    for (i, j), v in ex.items():
        dense[i, j] = complex(v)
    np.testing.assert_allclose(dense, assemble(spec).toarray())


def test_budget_guard():
    spec = ChainSpec(3, (projector(3, (0,)),), "open", 13)
    with pytest.raises(ResourceError):
        assemble(spec, budget_dim=3**12)


def test_term_side_validated():
    with pytest.raises(ValueError):
        ChainSpec(3, (projector(2, (0,)),), "open", 3)


def test_chainspec_json_roundtrip():
    spec = ChainSpec(3, (edge_laplacian(3, (0, 1), (1, 0)), projector(3, (2,), weight=Fraction(1, 2))),
                     "periodic", 5)
    back = ChainSpec.loads(spec.dumps())
    assert back.N == 5 and back.boundary == "periodic"
    assert (assemble(back).matrix != assemble(spec).matrix).nnz == 0


def test_hermiticity_of_sum():
    spec = ChainSpec(2, (_random_term(3, 2, 2),), "open", 4)
    op = assemble(spec)
    assert op.is_hermitian()
    assert sp.issparse(op.matrix)


def test_norm_bound_is_spectral_norm_for_small_terms():
    t = projector(2, (0, 1), weight=-3)
    assert operator_norm_bound(t) == pytest.approx(3.0)
