import io
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eimarket.equilibrium import (CONVERGED, OSCILLATING, EquilibriumState, detect_oscillation, initial_capacities,
                                  run, verify_equilibrium)
from eimarket.toys import toy_market


@pytest.fixture(scope="module")
def eom_toy():
    p = toy_market(1, design="EOM")
    return p, run(p)


def test_toy_converges_and_certifies(eom_toy):
    p, st_ = eom_toy
    assert st_.status == CONVERGED
    rep = verify_equilibrium(st_, p)
    assert rep.certified and rep.max_relative_gain <= 1e-3
    assert rep.skipped == ("iolr",)
    grid = verify_equilibrium(st_, p, method="grid")
    assert grid.certified


def test_perturbed_state_fails(eom_toy):
    p, st_ = eom_toy
    uid = p.ordered_ids()[0]
    caps = dict(st_.capacities)
    caps[uid] = 0.0 if caps[uid] > 0 else 100.0
    bad = replace(st_, capacities=caps)
    assert not verify_equilibrium(bad, p).certified


def test_eom_never_contracts(eom_toy):
    _, st_ = eom_toy
    assert st_.contracted == {} and set(st_.contracts.values()) == {0}
    assert all(not any(r["contracts"].values()) for r in st_.iolr)


def test_state_json_round_trip(eom_toy, tmp_path):
    _, st_ = eom_toy
    back = EquilibriumState.from_json(json.loads(st_.save(tmp_path / "s.json").read_text()))
    assert back.capacities == st_.capacities and back.status == st_.status
    assert "timings" not in st_.to_json()


def test_runs_are_deterministic():
    p = toy_market(2, design="EIM")
    a, b = run(p), run(p)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_log_lines_are_json():
    buf = io.StringIO()
    st_ = run(toy_market(1, design="EOM"), log=buf)
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == len(st_.solves)
    assert all("seconds" in rec and "capacity" in rec for rec in lines)


def test_outer_cycle_reported():
    st_ = run(toy_market(0, design="EIM"))
    assert st_.status == OSCILLATING
    assert st_.oscillation["period"] == 3
    lo, hi = st_.oscillation["band"]
    assert lo <= st_.oscillation["average"] <= hi


def test_initial_capacities():
    p = toy_market(0, generators=3)
    assert set(initial_capacities(p, "zero").values()) == {0.0}
    assert set(initial_capacities(p, "max").values()) == {375.0}
    r = initial_capacities(p, "random1", seed=4)
    assert r == initial_capacities(p, "random1", seed=4)
    assert all(v % 25 == 0 for v in r.values())
    with pytest.raises(ValueError):
        initial_capacities(p, "sideways")


def test_detect_two_cycle():
    trace = [(0, 0), (100, 50), (50, 100), (100, 50), (50, 100)]
    rep = detect_oscillation(trace)
    assert rep.period == 2 and rep.band == (150.0, 150.0)
    rep = detect_oscillation([(0,), (100,), (50,), (100,), (50,)])
    assert rep.period == 2 and rep.band == (50.0, 100.0) and rep.average == 75.0


def test_detect_no_cycle_uses_last_half():
    rep = detect_oscillation([(10,), (20,), (30,), (40,)])
    assert rep.period is None and rep.window == (2, 3) and rep.band == (30.0, 40.0)


@given(st.lists(st.integers(0, 10), min_size=2, max_size=5, unique=True), st.integers(2, 4), st.integers(0, 5))
def test_detect_planted_cycle(cycle, reps, prefix_len):
    prefix = [(100 + i,) for i in range(prefix_len)]
    trace = prefix + [(c,) for c in cycle] * reps
    rep = detect_oscillation(trace)
    assert rep.period == len(cycle)
    assert rep.band == (float(min(cycle)), float(max(cycle)))
    assert rep.average == pytest.approx(float(np.mean(cycle)))
