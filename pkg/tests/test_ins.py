import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eimarket.ins import InsBuildError, InsInput, audit_ins, evaluate_decision, solve_ins, uncovered
from eimarket.model import IolrConfig
from eimarket.oracles import ins_enumerate, uncovered_shed
from eimarket.toys import random_ins_input, toy_tech

LINKS = ["paper_literal_link", "cascade_link"]


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("link", LINKS)
def test_matches_enumeration(seed, link):
    inp = random_ins_input(seed)
    dec = solve_ins(inp, link)
    q, mw, util, _ = ins_enumerate(inp, link).value
    assert _rel(dec.utility, util) <= 1e-3
    aud = audit_ins(dec, inp)
    assert aud.ok
    assert aud.prudential_slack >= -1e-6


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.sampled_from(LINKS), st.sampled_from([0.0, 1e6, 1e7]))
def test_prudential_and_expected_profit_hold(seed, link, reserves):
    inp = random_ins_input(seed, reserves=reserves)
    dec = solve_ins(inp, link)
    assert dec.risk.cvar + reserves >= -1e-6 * max(1.0, reserves)
    assert dec.risk.mean_profit >= -1e-6 * max(1.0, abs(dec.risk.mean_profit))


@pytest.mark.parametrize("seed", range(3))
def test_eom_has_zero_cashflows(seed):
    inp = random_ins_input(seed)
    dec = solve_ins(inp, eom=True)
    assert not dec.contracts.any()
    assert dec.total_contracted == 0.0
    assert np.all(dec.profits == 0.0)


def test_zero_premiums_mean_no_contracts():
    inp = random_ins_input(3, premium_scale=0.0)
    dec = solve_ins(inp)
    assert not dec.contracts.any() and dec.total_contracted == 0.0


@given(st.lists(st.floats(0, 200), min_size=2, max_size=2), st.floats(0, 300), st.sampled_from(LINKS))
def test_uncovered_matches_oracle(shed, mw, link):
    s = np.array(shed)[:, None]
    comp = np.array([15000.0, 7500.0])
    np.testing.assert_allclose(uncovered(s, mw, comp, link), uncovered_shed(s, mw, comp, link), atol=1e-9)


@given(st.lists(st.floats(0, 200), min_size=2, max_size=2), st.floats(0, 300))
def test_cascade_restores_essential_first(shed, mw):
    s = np.array(shed)[:, None]
    g = uncovered(s, mw, np.array([15000.0, 7500.0]), "cascade_link")
    assert g.sum() == pytest.approx(max(0.0, sum(shed) - mw), abs=1e-9)
    if g[0, 0] > 1e-9:
        assert g[1, 0] == pytest.approx(shed[1])


def test_evaluate_decision_by_hand():
    inp = InsInput((np.array([[0.0, 10.0], [20.0, 40.0]]),), (np.array([2.0, 2.0]),), np.array([1.0]),
                   ("e", "n"), np.array([100.0, 50.0]), np.array([10.0, 10.0]), np.array([100.0, 100.0]),
                   (toy_tech(fixed_cost=1.0, investment_cost=0.0, step=5.0),), IolrConfig(0.0, 0.9, 0.0))
    psi, gam = evaluate_decision(inp, [1, 1], [15.0], "paper_literal_link")
    # premiums 2000; literal link nets 15 MW off each strip: e [0, 0], n [5, 25]
    np.testing.assert_allclose(gam[0], [[0.0, 0.0], [5.0, 25.0]])
    assert psi[0] == pytest.approx(2000.0 - 50.0 * 30 * 2 - 15.0)


def test_unknown_link_rejected():
    with pytest.raises(InsBuildError):
        solve_ins(random_ins_input(0), link="sideways")


def test_continuous_contracts_relax_the_grid():
    inp = random_ins_input(4, integral=False)
    assert solve_ins(inp).utility >= solve_ins(random_ins_input(4)).utility - 1e-6
