import numpy as np
import pytest

from eimarket.solver import Model, SolverConfigError, Status, export_model

BACKENDS = ["scipy", "highs"]


def _lp():
    m = Model("lp")
    x = m.add_var("x", ub=4.0)
    y = m.add_var("y", ub=3.0)
    m.add_constr({x: 1.0, y: 1.0}, ">=", 5.0, "need")
    m.set_objective({x: 2.0, y: 3.0}, sense="min")
    return m, x, y


@pytest.mark.parametrize("backend", BACKENDS)
def test_lp_primal_and_duals(backend):
    m, x, y = _lp()
    sol = m.solve(backend=backend)
    assert sol.status == Status.OPTIMAL
    assert sol.value(x) == pytest.approx(4.0) and sol.value(y) == pytest.approx(1.0)
    assert sol.objective_value == pytest.approx(11.0)
    # marginal unit comes from y at 3 $; binding >= row of a min has a non-negative multiplier
    assert sol.dual("need") == pytest.approx(3.0)
    lo, hi = sol.bound_duals
    assert hi[x] == pytest.approx(1.0)  # x at its bound saves 3 - 2 per unit


@pytest.mark.parametrize("backend", BACKENDS)
def test_milp(backend):
    m = Model("milp")
    b = m.add_vars(["b0", "b1", "b2"], lb=0.0, ub=1.0, kind="binary")
    m.add_rows(b[None, :], np.array([[3.0, 4.0, 5.0]]), "<=", 8.0, ["knap"])
    m.set_objective(sense="max", cols=b, vals=[4.0, 5.0, 7.0])
    sol = m.solve(backend=backend)
    assert sol.status.ok
    assert sol.objective_value == pytest.approx(11.0)
    assert list(np.round(sol.primal[b])) == [1.0, 0.0, 1.0]


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    m = Model("bad")
    x = m.add_var("x", ub=1.0)
    m.add_constr({x: 1.0}, ">=", 2.0, "r")
    m.set_objective({x: 1.0})
    assert m.solve(backend=backend).status == Status.INFEASIBLE


def test_unknown_backend():
    m, _, _ = _lp()
    with pytest.raises(SolverConfigError, match="unknown solver backend"):
        m.solve(backend="cplex")


def test_backend_env(monkeypatch):
    m, _, _ = _lp()
    monkeypatch.setenv("EIMARKET_SOLVER", "scipy")
    assert m.solve().objective_value == pytest.approx(11.0)


@pytest.mark.parametrize("fmt", ["mps", "lp"])
def test_export_round_trip_text(tmp_path, fmt):
    m, _, _ = _lp()
    p = export_model(m, tmp_path / f"m.{fmt}", fmt)
    text = p.read_text()
    assert "need" in text and "x" in text
