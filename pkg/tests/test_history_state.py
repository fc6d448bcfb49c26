import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specgap.history_state import (CompileError, PenaltySpec, SegmentModel, chain_ground_energy,
                                   chain_ground_energy_bruteforce, compile_history, flag_weight,
                                   full_block_energy, path_hamiltonian, segment_energy, segments_of, t_halt,
                                   w_halt)
from specgap.marker import build_marker
from specgap.qpe_sim import encode_phase
from specgap.tm_model import Rule, TMDefinition, consume_k, never_halt, sweeper_tm


def test_unpenalized_halting_run_has_zero_energy():
    h = compile_history(consume_k(3), 5)
    assert h.outcome == "halted" and not h.penalized
    assert abs(h.lambda_min()) <= 1e-12
    assert abs(np.linalg.eigvalsh(h.hamiltonian)[0]) <= 1e-12


def test_penalty_scaling_over_path_lengths():
    lams = {T: np.linalg.eigvalsh(path_hamiltonian(T, {T - 1: 1.0}))[0] for T in range(5, 61)}
    assert all(lam > 1 / T**3 for T, lam in lams.items())
    c = np.array([lam * T**2 for T, lam in lams.items()])
    assert c.max() / c.min() <= 2


def test_never_halt_is_penalized_at_tape_end():
    for cells in range(1, 8):
        h = compile_history(never_halt(), cells)
        assert h.outcome == "out_of_tape"
        assert list(h.penalized) == [h.n_vertices - 1]


def test_sweeper_flag_state_is_penalized():
    h = compile_history(sweeper_tm(), 4, "11", PenaltySpec(flag_penalty_weight=0.25))
    assert h.outcome == "halted"
    assert h.flag_vertices and all(h.penalized[v] == 0.25 for v in h.flag_vertices)
    assert h.lambda_min() > 0


def test_irreversible_machine_rejected():
    rules = {("a", "0"): Rule("0", "b", "R"), ("a", "1"): Rule("0", "b", "R"),
             ("f", "0"): Rule("0", "a", "N"), ("f", "1"): Rule("1", "a", "N")}
    tm = TMDefinition(("a", "b", "f"), ("0", "1"), "a", "f", rules)
    with pytest.raises(CompileError):
        compile_history(tm, 3)


def test_penalty_weights_bounded():
    with pytest.raises(ValueError):
        PenaltySpec(flag_penalty_weight=1.5)


HALTING = SegmentModel(consume_k(6), enc=encode_phase("1"))
NEVER = SegmentModel(never_halt(), mu=Fraction(1, 4))


def test_halting_profile():
    wh = w_halt(HALTING)
    assert wh == 8
    assert t_halt(HALTING) == 6
    prof = {w: segment_energy(HALTING, w).lambda_min for w in range(2, 2 * wh + 1)}
    assert all(e > 0 for w, e in prof.items() if w < wh)
    assert all(e < 0 for w, e in prof.items() if w >= wh)
    assert min(prof, key=prof.get) == wh


def test_truncation_threshold():
    phi = HALTING.enc.phi_len
    assert [w for w in range(2, 12) if HALTING.truncated(w)] == list(range(2, phi + 5))
    assert all(flag_weight(HALTING, w) >= float(HALTING.enc.mu) for w in range(2, phi + 5))
    assert flag_weight(HALTING, phi + 5) == 0.0


def test_never_halting_profile_positive_and_decreasing():
    e = [segment_energy(NEVER, w).lambda_min for w in range(2, 13)]
    assert all(x > 0 for x in e)
    assert all(a > b for a, b in zip(e, e[1:]))


def test_truncated_range_is_not_monotone():
    # flag weights follow the oscillating overlap, so the truncated range has no order
    m = SegmentModel(never_halt(), enc=encode_phase("1"))
    e = [segment_energy(m, w).lambda_min for w in range(2, 13)]
    assert all(x > 0 for x in e)
    assert e[2] < e[3]  # w = 4 below w = 5


def test_segments_of_counts_boundaries():
    assert segments_of((1, 0, 0, 1, 1, 0, 1)) == [4, 2, 3]


@pytest.mark.parametrize("N", range(2, 11))
def test_dp_matches_bruteforce(N):
    m = SegmentModel(consume_k(2), mu=Fraction(1, 4))
    assert chain_ground_energy(m, N).lambda_min == pytest.approx(chain_ground_energy_bruteforce(m, N).lambda_min,
                                                                 abs=1e-12)


@pytest.mark.parametrize("N", range(2, 8))
def test_dp_matches_microscopic_blocks(N):
    m = SegmentModel(consume_k(2), mu=Fraction(1, 4))
    spec = build_marker(N)
    brute = min(full_block_energy(m, (1,) + s + (1,), spec) for s in itertools.product((0, 1), repeat=N - 2))
    assert chain_ground_energy(m, N).lambda_min == pytest.approx(brute, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 12))
def test_ground_signature_reconstructs_chain(N):
    g = chain_ground_energy(SegmentModel(consume_k(2), mu=Fraction(1, 4)), N)
    assert len(g.signature) == N
    assert g.signature[0] == g.signature[-1] == 1
