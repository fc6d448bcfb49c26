import pytest
from hypothesis import given, settings, strategies as st

from specgap.tm_model import (MalformedMachineError, Rule, TMDefinition, check_well_formed, consume_k,
                              get_machine, halting_profile, immediate_halt, never_halt, run_bounded,
                              runtime_bound, sweeper_tm, unary_counter)

ALL = [sweeper_tm(), immediate_halt(), never_halt(), consume_k(3), unary_counter()]


def test_sweeper_table_is_verbatim():
    tm = sweeper_tm()
    assert tm.rules[("q0", "1")] == Rule("#", "q1", "R")
    assert tm.rules[("q1", "0")] == Rule("0", "q?", "L")
    assert tm.rules[("q?", "1")] == Rule("1", "q2", "R")
    assert tm.rules[("q3", "#")] == Rule("1", "qf", "N")
    assert tm.flag == "q?"


@pytest.mark.parametrize("tm", ALL, ids=lambda t: t.name)
def test_toy_machines_are_well_formed(tm):
    rep = check_well_formed(tm)
    assert rep.ok, rep.problems


def test_branching_machine_is_not_reversible():
    alphabet = ("0", "1")
    rules = {("a", "0"): Rule("1", "b", "R"), ("a", "1"): Rule("1", "b", "R"),
             ("f", "0"): Rule("0", "a", "N"), ("f", "1"): Rule("1", "a", "N")}
    rep = check_well_formed(TMDefinition(("a", "b", "f"), alphabet, "a", "f", rules))
    assert not rep.reversible


def test_sweeper_runs():
    tm = sweeper_tm()
    tr = run_bounded(tm, "11", 3)
    assert tr.halted and tr.steps == 7
    assert tr.configurations[-1].tape == ("1", "1", "0")
    assert run_bounded(tm, "11", 2).outcome == "out_of_tape"
    assert halting_profile(tm, "11").w_halt == 3


def test_missing_rule_is_malformed():
    with pytest.raises(MalformedMachineError):
        run_bounded(sweeper_tm(), "0", 3)


def test_never_halt_runs_out_of_tape():
    for w in range(1, 10):
        assert run_bounded(never_halt(), "", w).outcome == "out_of_tape"
    assert halting_profile(never_halt()).w_halt is None


def test_out_of_time():
    assert run_bounded(never_halt(), "", 10, t_max=3).outcome == "out_of_time"


def test_consume_k_profile():
    assert halting_profile(consume_k(3)).w_halt == 3
    assert get_machine("consume_5").name == "consume_5"
    with pytest.raises(KeyError):
        get_machine("no_such_machine")


def test_runtime_bound():
    assert runtime_bound(sweeper_tm(), 2) == 6 * 2 * 9
    assert runtime_bound(4, 3, 2) == 4 * 3 * 8


def test_json_roundtrip(tmp_path):
    tm = sweeper_tm()
    p = tmp_path / "m.json"
    tm.dump(p)
    back = TMDefinition.load(p)
    assert back.rules == tm.rules and back.flag == tm.flag and hash(back) == hash(tm)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL), st.integers(1, 8), st.data())
def test_runs_never_repeat_a_configuration(tm, w, data):
    tape = data.draw(st.text(alphabet="01", max_size=w))
    if tm.name in ("sweeper", "unary_counter"):
        tape = "1" * len(tape)
    try:
        tr = run_bounded(tm, tape, w)
    except MalformedMachineError:
        return
    assert len(set(tr.configurations)) == len(tr.configurations)
    assert tr.steps <= runtime_bound(tm, w)
