import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eimarket.gmp import GmpBuildError, GmpInstance, audit_solution, build_gmp, evaluate_capacity, solve_gmp
from eimarket.model import GeneratorUnit, ShedCostMode
from eimarket.oracles import gmp_profits, grid_search_gmp
from eimarket.toys import random_gmp_instance, toy_scenario_set, toy_strips, toy_tech


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("mode", list(ShedCostMode))
def test_matches_grid_oracle(seed, mode):
    inst = random_gmp_instance(seed, mode=mode)
    sol = solve_gmp(inst)
    cap, util, _ = grid_search_gmp(inst).value
    assert _rel(sol.utility, util) <= 1e-3
    assert audit_solution(inst, sol).ok


@settings(max_examples=8)
@given(st.integers(100, 10_000))
def test_milp_profits_equal_recleared_profits(seed):
    inst = random_gmp_instance(seed, bits=3)
    sol = solve_gmp(inst)
    np.testing.assert_allclose(sol.profits, gmp_profits(inst, sol.capacity), rtol=1e-6, atol=1e-3)
    assert sol.capacity in inst.capacity_grid()


def test_model_size_counts():
    inst = random_gmp_instance(0, scenarios=2, intervals=24, bits=2)
    gm = build_gmp(inst)
    assert gm.counts["binaries"] == 2
    assert gm.counts["products"] == 2 * 2 * 24
    assert gm.counts["envelope_rows"] == 4 * 2 * 2 * 24


def test_no_scarcity_builds_nothing():
    ss = toy_scenario_set(np.full((2, 2, 6), 20.0))
    rival = GeneratorUnit("r", toy_tech("r", variable_cost=10.0), capacity=100.0)
    inst = GmpInstance(GeneratorUnit("g", toy_tech()), (rival,), ss, toy_strips())
    sol = solve_gmp(inst)
    assert sol.capacity == 0.0 and sol.utility == pytest.approx(0.0, abs=1e-6)


def test_monopolist_withholds():
    ss = toy_scenario_set(np.full((2, 2, 6), 60.0))
    inst = GmpInstance(GeneratorUnit("g", toy_tech(fixed_cost=1000.0, investment_cost=10_000.0)), (), ss, toy_strips())
    sol = solve_gmp(inst)
    # serving all 120 MW would drop the price to its own cost; the largest step short of that keeps the cap
    assert sol.capacity == pytest.approx(100.0)
    assert grid_search_gmp(inst).value[0] == pytest.approx(100.0)
    assert sol.financing.passed


def test_evaluate_capacity_matches_oracle():
    inst = random_gmp_instance(5)
    ev = evaluate_capacity(inst, 50.0)
    np.testing.assert_allclose(ev.profits, gmp_profits(inst, 50.0), rtol=1e-9, atol=1e-6)


def test_unbounded_envelope_rejected():
    inst = random_gmp_instance(1)
    bad = GmpInstance(inst.unit, inst.rivals, inst.scenario_set, inst.strips, price_cap=10.0)
    with pytest.raises(GmpBuildError):
        build_gmp(bad)


def test_grid_oracle_single_point_and_fallback():
    inst = random_gmp_instance(2)
    assert grid_search_gmp(inst, grid=[50.0]).value[0] in (0.0, 50.0)
    costly = GmpInstance(GeneratorUnit("g", toy_tech(investment_cost=1e12)), inst.rivals, inst.scenario_set,
                         inst.strips)
    assert grid_search_gmp(costly).value[0] == 0.0
