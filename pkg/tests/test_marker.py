import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specgap.core import assemble
from specgap.marker import (UNARY, ConsistencyError, FalloffSpec, UnsupportedFalloffError, all_signatures,
                            apply_segment_constraints, block_operator, block_restrict, block_spectrum,
                            build_marker, check_block_theorem, classify, commutes_with_boundaries,
                            constrained_block_minimum, constrained_block_minimum_micro, decompose,
                            idealized_block_energy, modified_signatures, positive_part,
                            predicted_block_energy, signature_of)
from specgap.tm_model import sweeper_tm

LINEAR2 = FalloffSpec("linear", zeta=2)


@pytest.mark.parametrize("N,falloff", [(4, UNARY), (5, UNARY), (4, LINEAR2)])
def test_boundary_symbol_is_conserved(N, falloff):
    assert commutes_with_boundaries(assemble(build_marker(N, falloff)), N, falloff.local_dim)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 6), st.data())
def test_local_block_build_matches_restriction(N, data):
    sig = tuple(data.draw(st.lists(st.integers(0, 1), min_size=N, max_size=N)))
    spec = build_marker(N)
    a = block_operator(spec, sig).toarray()
    b = block_restrict(assemble(spec), sig, spec).toarray()
    np.testing.assert_array_equal(a, b)


def test_block_spectra_reassemble_full_spectrum():
    spec = build_marker(5)
    full = np.linalg.eigvalsh(assemble(spec).toarray())
    blocks = np.sort(np.concatenate([block_spectrum(spec, s) for s in all_signatures(5)]))
    np.testing.assert_allclose(blocks, full, atol=1e-9)


def test_positive_part_is_psd():
    ev = np.linalg.eigvalsh(assemble(positive_part(5)).toarray())
    assert ev[0] > -1e-12


def test_frozen_single_segment_block():
    lam = block_spectrum(build_marker(5), (1, 0, 0, 0, 1))[0]
    assert lam == pytest.approx(-0.03209, abs=5e-6)
    assert -1 / 8 <= lam <= -1 / 64


@pytest.mark.parametrize("N", [5, 6, 7])
def test_good_blocks_in_interval_with_half_gap(N):
    res = check_block_theorem(N)
    assert not [f for f in res["failures"] if f[1] in ("interval", "gap")]


@pytest.mark.parametrize("N", [4, 5])
def test_linear_falloff_good_blocks(N):
    res = check_block_theorem(N, LINEAR2)
    assert not [f for f in res["failures"] if f[1] in ("interval", "gap")]
    iv = predicted_block_energy((1, 0, 0, 1), LINEAR2)
    assert iv.lower == -Fraction(1, 16)


@pytest.mark.parametrize("N", [6, 8])
def test_repair_failures_are_the_left_fragment_bonus(N):
    """Only signatures opening with an unbounded head fragment next to a boundary miss the margin."""
    res = check_block_theorem(N)
    repairs = [f for f in res["failures"] if f[1] == "repair"]
    assert repairs, "the literal repair claim is known to fail at these sizes"
    assert all(sig.startswith("01") for sig, _, _ in repairs)
    for row in res["rows"]:
        if "margin" in row.extra and not row.signature.startswith("01"):
            assert row.extra["margin"] >= 1 - 1e-9


@pytest.mark.parametrize("sig", [(1, 0, 0, 1, 0, 0, 1), (1, 1, 0, 0, 1, 0, 1), (1, 0, 0, 0, 1, 1, 1)])
def test_idealized_model_matches_microscopic(sig):
    lam = block_spectrum(build_marker(len(sig)), sig)[0]
    assert lam == pytest.approx(idealized_block_energy(sig), abs=1e-9)


def test_signatures_and_classes():
    assert signature_of(0, 3) == (1, 1, 1)
    assert classify((1, 0, 1)) == "good"
    assert classify((1, 1)) == "double"
    assert classify((0, 1, 1)) == "improper+double"
    assert classify((1, 1, 1)) == "double"
    assert decompose((1, 0, 0, 1, 0, 1)).segments == (2, 1)
    assert (1, 0, 1) in modified_signatures((0, 0, 1))
    assert predicted_block_energy((0, 0, 1)) is None


def test_falloff_kinds():
    assert UNARY.f(5) == 5 and LINEAR2.f(5) == 10
    ad = FalloffSpec("adaptive", machine=sweeper_tm())
    assert ad.f(3) > 3 * 3
    with pytest.raises(UnsupportedFalloffError):
        ad.head_phases
    with pytest.raises(UnsupportedFalloffError):
        FalloffSpec("cubic")
    assert FalloffSpec("table", table={1: 4}).f(1) == 4


def test_block_restriction_detects_leaks():
    spec = build_marker(3)
    op = assemble(spec)
    m = op.matrix.tolil()
    m[0, 5] = m[5, 0] = 1.0
    from specgap.core import SparseOperator
    with pytest.raises(ConsistencyError):
        block_restrict(SparseOperator(m.tocsr()), (1, 1, 1), spec)


def test_minimum_length_constraint_lifts_short_segments():
    spec = build_marker(6)
    sig = (1, 0, 0, 1, 0, 1)
    plain = block_spectrum(spec, sig)[0]
    assert constrained_block_minimum(spec, sig, 3, 1) >= plain + 1
    good = (1, 0, 0, 0, 0, 1)
    assert constrained_block_minimum(spec, good, 3, 1) == pytest.approx(block_spectrum(spec, good)[0], abs=1e-12)


def test_parity_constraint_penalizes_odd_segments():
    spec = build_marker(7)
    odd = (1, 0, 0, 0, 1, 0, 1)
    assert constrained_block_minimum(spec, odd, 1, 2) >= block_spectrum(spec, odd)[0] + 1
    even = (1, 0, 0, 1, 0, 0, 1)
    assert constrained_block_minimum(spec, even, 1, 2) == pytest.approx(block_spectrum(spec, even)[0], abs=1e-12)


def test_constrained_minimum_matches_microscopic_filling():
    spec = build_marker(4)
    sig = (1, 0, 0, 1)
    lifted = apply_segment_constraints(spec, 2, 1)
    assert lifted.local_dim == 3 * 2
    best = min(constrained_block_minimum_micro(spec, sig, 2, 1, cs)
               for cs in itertools.product(range(2), repeat=4))
    assert best == pytest.approx(constrained_block_minimum(spec, sig, 2, 1), abs=1e-9)
