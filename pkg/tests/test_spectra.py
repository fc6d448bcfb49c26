import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from specgap.core import ResourceError, assemble
from specgap.marker import all_signatures, block_operator, build_marker
from specgap.spectra import block_resolved, diagonalize_dense, lowest_k, merged_eigenvalues


def _random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = sp.random(n, n, density=0.05, random_state=rng)
    return (a + a.T).tocsr()


def test_lanczos_agrees_with_dense():
    m = _random_hermitian(300, 7)
    k = lowest_k(m, 4)
    d = diagonalize_dense(m)
    np.testing.assert_allclose(k.eigenvalues, d.eigenvalues[:4], atol=1e-8)
    assert np.all(k.residuals < 1e-6)


def test_seeded_runs_are_bit_stable():
    m = _random_hermitian(400, 3)
    a, b = lowest_k(m, 3, seed=11), lowest_k(m, 3, seed=11)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_dense_limit():
    with pytest.raises(ResourceError):
        diagonalize_dense(sp.identity(5000, format="csr"))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_variational_bound(seed):
    m = _random_hermitian(80, seed)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(80)
    v /= np.linalg.norm(v)
    assert diagonalize_dense(m).ground <= v @ (m @ v) + 1e-12


def test_block_sum_completeness():
    spec = build_marker(4)
    blocks = [("".join(map(str, s)), block_operator(spec, s)) for s in all_signatures(4)]
    merged = merged_eigenvalues(block_resolved(blocks))
    np.testing.assert_allclose(merged, diagonalize_dense(assemble(spec)).eigenvalues, atol=1e-9)


def test_json_schema():
    r = diagonalize_dense(np.diag([2.0, -1.0]), label="x")
    obj = json.loads(r.to_json())
    assert obj["eigenvalues"] == [-1.0, 2.0]
    assert set(obj) == {"eigenvalues", "residuals", "meta"}
    assert r.gap == 3.0
