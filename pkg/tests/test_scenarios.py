from datetime import datetime

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eimarket.model import DemandStrip
from eimarket.oracles import brute_ward
from eimarket.scenarios import (INTERVAL, RawTrace, ScenarioSet, TraceFormatError, build_scenario_set, day_features,
                                load_traces, size_vre_capacity, split_strips, ward_cluster, write_traces)

STRIPS = (DemandStrip("essential", 15000.0, 0.0, 0.5), DemandStrip("non_essential", 7500.0, 0.0, 0.5))


def _trace(sid, days, seed, regimes=False):
    rng = np.random.default_rng(seed)
    n = days * 48
    h = np.arange(n) % 48
    base = 100 + 30 * np.sin(2 * np.pi * h / 48)
    if regimes:
        base = base + np.repeat(np.where(np.arange(days) % 2 == 0, 0.0, 80.0), 48)
    d = base + rng.normal(0, 2, n)
    a = np.clip(0.4 + 0.2 * np.cos(2 * np.pi * h / 48) + rng.normal(0, 0.02, n), 0, 1)
    stamps = tuple(datetime(2020, 1, 1) + i * INTERVAL for i in range(n))
    return RawTrace(sid, stamps, d, a)


def test_trace_round_trip(tmp_path):
    tr = [_trace("a", 3, 0), _trace("b", 3, 1)]
    p = write_traces(tr, tmp_path / "t.csv.gz")
    back = load_traces(p)
    assert [t.scenario_id for t in back] == ["a", "b"]
    np.testing.assert_array_equal(back[0].system_demand, tr[0].system_demand)


def test_trace_errors_name_the_line(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("timestamp,demand_mw,vre_availability\n2020-01-01T00:00:00,10,0.5\n2020-01-01T00:30:00,10,1.5\n")
    with pytest.raises(TraceFormatError, match="x.csv:3"):
        load_traces(p)
    p.write_text("timestamp,demand_mw\n")
    with pytest.raises(TraceFormatError, match="missing column"):
        load_traces(p)
    p.write_text("timestamp,demand_mw,vre_availability\n2020-01-01T00:00:00,10,0.5\n2020-01-01T01:00:00,10,0.5\n")
    with pytest.raises(TraceFormatError, match="half-hourly"):
        load_traces(p)


def test_split_strips_sums_exactly():
    d = np.array([100.0, 33.3, 0.1])
    s = split_strips(d, [0.3, 0.7])
    np.testing.assert_array_equal(s.sum(axis=0), d)


def test_vre_sizing_meets_rps():
    tr = [_trace("a", 4, 0)]
    cap = size_vre_capacity(tr, 0.4)
    assert cap * tr[0].vre_availability.sum() == pytest.approx(0.4 * tr[0].system_demand.sum())
    assert size_vre_capacity(tr, 0.0) == 0.0


@given(st.integers(4, 14), st.integers(1, 4), st.integers(0, 10_000))
def test_ward_matches_brute_force(n, k, seed):
    X = np.random.default_rng(seed).normal(size=(n, 5))
    res = ward_cluster(X, k)
    merges, labels = brute_ward(X, k)
    assert len(res.merges) == len(merges) == n - k
    for (a, b, c), (ra, rb, rc) in zip(res.merges, merges):
        assert sorted(a + b) == sorted(ra + rb)
        assert c == pytest.approx(rc, rel=1e-9, abs=1e-12)
    np.testing.assert_array_equal(res.labels, labels)
    assert res.weights.sum() == n


@given(st.integers(5, 20), st.integers(0, 1000))
def test_merge_costs_non_decreasing(n, seed):
    X = np.random.default_rng(seed).normal(size=(n, 3))
    costs = [c for _, _, c in ward_cluster(X, 1).merges]
    assert all(b >= a - 1e-9 for a, b in zip(costs, costs[1:]))


def test_two_regimes_recovered():
    tr = _trace("a", 30, 3, regimes=True)
    dem, av = tr.daily()
    res = ward_cluster(day_features(dem, av), 2)
    groups = {tuple(np.nonzero(res.labels == c)[0] % 2) for c in range(2)}
    assert all(len(set(g)) == 1 for g in groups)


def test_build_scenario_set_weights_and_energy(tmp_path):
    tr = [_trace("a", 10, 0), _trace("b", 10, 1)]
    ss = build_scenario_set(tr, STRIPS, 0.3, 3)
    for sc in ss.scenarios:
        assert sum(d.weight for d in sc.rep_days) == 10
        assert sc.num_intervals == 3 * 48
    assert all(v["within_tolerance"] for v in ss.metadata["energy_check"].values())
    assert ss.probabilities.sum() == pytest.approx(1.0)
    assert ss.violations(STRIPS, 48) == []
    back = ScenarioSet.load(ss.save(tmp_path / "ss.json"))
    np.testing.assert_array_equal(back.scenarios[1].demand, ss.scenarios[1].demand)
    assert back.strip_peaks == ss.strip_peaks


def test_medoid_days_are_source_days():
    tr = [_trace("a", 8, 0)]
    ss = build_scenario_set(tr, STRIPS, 0.0, 2, use_medoid=True)
    dem, _ = tr[0].daily()
    for d in ss.scenarios[0].rep_days:
        assert any(np.allclose(d.strip_demand.sum(axis=0), dem[i]) for i in d.source_days)


@given(st.integers(3, 25), st.integers(0, 10_000))
def test_ward_heights_match_scipy(n, seed):
    from scipy.cluster.hierarchy import linkage
    X = np.random.default_rng(seed).normal(size=(n, 4))
    ours = sorted(np.sqrt(2.0 * np.array([c for _, _, c in ward_cluster(X, 1).merges])))
    np.testing.assert_allclose(ours, sorted(linkage(X, "ward")[:, 2]), rtol=1e-9, atol=1e-12)
