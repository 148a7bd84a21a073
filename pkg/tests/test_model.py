import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eimarket.model import (DemandStrip, GeneratorTech, GeneratorUnit, IolrConfig, MarketConfig, UnitKind,
                            annuity_factor, validate_model)
from eimarket.toys import toy_scenario_set, toy_strips, toy_tech


def test_annuity_known_values():
    assert annuity_factor(0.0, 20) == pytest.approx(0.05)
    assert annuity_factor(0.1, 10) == pytest.approx(0.16274539488, rel=1e-9)


@given(st.floats(0.001, 0.3), st.floats(1, 60))
def test_annuity_repays_principal(rate, life):
    n = math.floor(life)
    a = annuity_factor(rate, n)
    pv = sum(a / (1 + rate) ** k for k in range(1, n + 1))
    assert pv == pytest.approx(1.0, rel=1e-9)


@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.floats(0.0, 1.0))
def test_wacc_between_rates(re, rd, kappa):
    t = GeneratorTech("t", 1.0, 0.0, 0.0, 20, re, rd, kappa)
    assert min(re, rd) - 1e-12 <= t.wacc <= max(re, rd) + 1e-12


def test_availability_price():
    t = GeneratorTech("t", 50.0, 10_000.0, 1_000_000.0, 20, 0.12, 0.08, 0.6)
    assert t.wacc == pytest.approx(0.096)
    assert t.availability_price == pytest.approx(10_000.0 + annuity_factor(0.096, 20) * 1e6)


def test_valid_model_passes():
    ss = toy_scenario_set(np.ones((2, 2, 4)) * 50)
    units = [GeneratorUnit("g", toy_tech(), capacity=50.0)]
    assert validate_model(ss, units, toy_strips(), MarketConfig(intervals_per_day=4), IolrConfig()).ok


def test_violations_are_located():
    demand = np.ones((1, 2, 4)) * 50
    demand[0, 1, 2] = -1.0
    ss = toy_scenario_set(demand)
    rep = validate_model(ss, [GeneratorUnit("g", toy_tech(), capacity=30.0)],
                         (DemandStrip("a", 100, 0, 0.7), DemandStrip("b", -1, 0, 0.2)), MarketConfig(price_cap=10.0))
    text = [str(v) for v in rep.violations]
    assert any("strip b, t=2, scenario=s0" in t for t in text)
    assert any("not a multiple of step" in t for t in text)
    assert any("compensation_value" in t for t in text)
    assert any("shares must sum to 1" in t for t in text)
    assert any("price_cap" in t for t in text)
    with pytest.raises(ValueError):
        rep.raise_if_failed()


def test_vre_availability_checked():
    ss = toy_scenario_set(np.ones((1, 2, 3)), vre=np.array([[0.5, 1.2, 0.0]]))
    vre = GeneratorUnit("v", toy_tech(), UnitKind.FIXED_VRE, 10.0, "vre")
    rep = validate_model(ss, [vre], toy_strips())
    assert any("t=1" in str(v) and "availability" in str(v) for v in rep.violations)


def test_max_capacity_from_bits():
    assert toy_tech(step=25.0, bits=2).max_capacity == 75.0
