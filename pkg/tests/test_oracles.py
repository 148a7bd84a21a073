import numpy as np
import pytest

from eimarket.oracles import (GRID_LIMIT, OracleSizeError, brute_ward, grid_search_gmp, ins_enumerate,
                              merit_order_clear, reference_dispatch, tail_cvar)
from eimarket.toys import random_gmp_instance, random_ins_input


def test_tail_cvar_hand_values():
    assert tail_cvar([1.0, 2.0, 3.0, 4.0], [0.25] * 4, 0.5) == pytest.approx(1.5)
    assert tail_cvar([5.0], [1.0], 0.99) == 5.0


def test_boundary_price_takes_next_block():
    # demand exactly fills the first unit: next block sets the price
    price, disp, shed, mu = reference_dispatch([10.0, 30.0], [50.0, 50.0], 50.0, [2000.0], [50.0])
    assert price == 30.0 and mu[0] == 20.0


def test_vectorised_clear_matches_scalar():
    rng = np.random.default_rng(0)
    costs = [10.0, 30.0, 50.0]
    limits = rng.uniform(0, 60, (3, 20))
    demand = rng.uniform(0, 200, 20)
    price, disp, shed = merit_order_clear(costs, limits, demand, [2000.0], [demand])
    for t in range(20):
        p, d, s, _ = reference_dispatch(costs, limits[:, t], demand[t], [2000.0], [demand[t]])
        assert price[t] == p
        np.testing.assert_allclose(disp[:, t], d)


def test_grid_limit_enforced():
    inst = random_gmp_instance(0)
    with pytest.raises(OracleSizeError):
        grid_search_gmp(inst, grid=np.zeros(GRID_LIMIT + 1))
    with pytest.raises(OracleSizeError):
        ins_enumerate(random_ins_input(0), max_size=2)


def test_brute_ward_three_points():
    merges, labels = brute_ward(np.array([[0.0], [1.0], [10.0]]), 1)
    assert merges[0][:2] == ([0], [1]) and merges[0][2] == pytest.approx(0.5)
    assert list(labels) == [0, 0, 0]


def test_oracle_results_carry_size_and_time():
    r = grid_search_gmp(random_gmp_instance(1, bits=2))
    assert r.size == 4 and r.wall_time >= 0 and r.method == "grid_search_gmp"
