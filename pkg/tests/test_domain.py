import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forensics.domain import Dataset, ExitPollRow, MachineRecord, PrecinctRecord, validate_dataset


def precinct(pid="P1", yes=40, **kw):
    base = dict(precinct_id=pid, yes_votes=yes, signatures=30, registered_at_reafirmazo=180,
                new_voters=20, non_voters=60)
    base.update(kw)
    return PrecinctRecord(**base)


def test_empty_dataset_is_valid():
    rep = validate_dataset(Dataset())
    assert rep.ok and len(rep) == 0 and not rep.notes


def test_tallies_exceed_registered():
    d = Dataset(machines=[MachineRecord("M1", "P1", 60, 50, 100)], precincts=[precinct(yes=60)])
    rep = validate_dataset(d)
    assert [v.rule for v in rep] == ["tallies exceed registered"]
    assert rep.violations[0].record == "machine P1/M1"


def test_cross_level_yes_mismatch():
    d = Dataset(machines=[MachineRecord("M1", "P1", 50, 20, 100), MachineRecord("M2", "P1", 40, 30, 100)],
                precincts=[precinct(yes=95)])
    rep = validate_dataset(d)
    assert [v.rule for v in rep] == ["machine yes total differs from precinct"]
    assert rep.violations[0].detail == "90!=95"


def test_turnout_derived_and_checked():
    p = precinct()
    assert p.electorate == 200 and p.votes_cast == 140
    assert p.turnout == pytest.approx(0.7)
    assert validate_dataset(Dataset(precincts=[p])).ok
    bad = precinct(turnout=0.7 + 1e-6)
    assert validate_dataset(Dataset(precincts=[bad])).rules()["turnout inconsistent"] == 1
    ok = precinct(turnout=0.7 + 1e-12)
    assert validate_dataset(Dataset(precincts=[ok])).ok


def test_yes_above_electorate():
    rep = validate_dataset(Dataset(precincts=[precinct(yes=250)]))
    assert rep.rules() == {"yes exceeds electorate": 1, "yes exceeds votes cast": 1}


def test_exit_poll_zero_is_a_value_not_absence():
    p = precinct(exit_poll_yes=0, exit_poll_total=25)
    assert p.polled
    assert validate_dataset(Dataset(precincts=[p])).ok
    assert not precinct().polled
    rep = validate_dataset(Dataset(precincts=[precinct(exit_poll_yes=3)]))
    assert rep.rules() == {"partial exit poll": 1}


def test_poll_rows_checked():
    d = Dataset(precincts=[precinct()],
                polls=[ExitPollRow("P1", 5, 4, "sumate"), ExitPollRow("P9", 1, 2, "sumate"),
                       ExitPollRow("P1", 1, 2, "gallup"), ExitPollRow("P1", 1, 2, "gallup")])
    rules = validate_dataset(d).rules()
    assert rules["exit poll out of range"] == 1
    assert rules["unknown precinct"] == 1
    assert rules["unknown pollster"] == 2
    assert rules["duplicate poll row"] == 1


def test_duplicates_and_unknown_precinct():
    d = Dataset(machines=[MachineRecord("M1", "P1", 20, 20, 100), MachineRecord("M1", "P1", 20, 20, 100),
                          MachineRecord("M1", "PX", 1, 1, 10)],
                precincts=[precinct(), precinct()])
    rules = validate_dataset(d).rules()
    assert rules["duplicate machine id"] == 1
    assert rules["duplicate precinct id"] == 1
    assert rules["unknown precinct"] == 1


def test_single_machine_noted_not_violation():
    d = Dataset(machines=[MachineRecord("M1", "P1", 40, 100, 200)], precincts=[precinct()])
    rep = validate_dataset(d)
    assert rep.ok
    assert [n.rule for n in rep.notes] == ["dispersion-inapplicable"]


def test_with_audited():
    d = Dataset(precincts=[precinct("A"), precinct("B")]).with_audited(["B"])
    assert d.audited_ids() == frozenset({"B"})


def test_records_immutable():
    p = precinct()
    with pytest.raises(AttributeError):
        p.yes_votes = 3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_validation_order_independent_and_idempotent(seed):
    r = random.Random(seed)
    machines = [MachineRecord(f"M{i % 3}", f"P{i % 4}", r.randint(-1, 60), r.randint(0, 60), r.randint(50, 120))
                for i in range(12)]
    precincts = [precinct(f"P{i}", yes=r.randint(0, 250)) for i in range(5)]
    polls = [ExitPollRow(f"P{r.randint(0, 6)}", r.randint(0, 5), r.randint(0, 5), "sumate") for _ in range(4)]
    d1 = Dataset(machines, precincts, "", polls)
    shuffled = [list(x) for x in (machines, precincts, polls)]
    for x in shuffled:
        r.shuffle(x)
    d2 = Dataset(*shuffled[:2], "", shuffled[2])
    rep1, rep2 = validate_dataset(d1), validate_dataset(d2)
    assert rep1 == rep2
    assert validate_dataset(d1) == rep1
