"""Copper-plate spot market clearing, dual certificates, curtailment and settlement.

The clearing LP for one scenario is

    min  sum_t [ sum_g C_g p_gt + sum_b c_b s_bt ]
    s.t. sum_g p_gt + sum_b s_bt = D_t          [price]
         0 <= p_gt <= Pmax_g * A_gt            [mu_lo, mu_hi]
         0 <= s_bt <= L_bt                     [mu_sh_lo, mu_sh_hi]

Shed "blocks" ``b`` are either one aggregate block priced at the market price
cap (``capped_settlement``) or one block per demand strip priced at its
compensation value (``paper_literal``).  Objective terms are per-hour rates, so
the power-balance dual is a $/MWh price; annual amounts multiply by
``scenario.hours``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import DemandStrip, GeneratorUnit, ShedCostMode
from .solver import Model, Status


class DispatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class DispatchOutcome:
    scenario_id: str
    unit_ids: tuple
    unit_costs: np.ndarray  # (U,)
    gen_limit: np.ndarray  # (U, T) capacity x availability
    shed_mode: ShedCostMode
    shed_costs: np.ndarray  # (B,)
    shed_limit: np.ndarray  # (B, T)
    demand: np.ndarray  # (S, T) strip demand
    hours: np.ndarray  # (T,)
    price: np.ndarray  # (T,)
    dispatch: np.ndarray  # (U, T)
    shed_blocks: np.ndarray  # (B, T)
    mu_gen_lo: np.ndarray
    mu_gen_hi: np.ndarray
    mu_shed_lo: np.ndarray
    mu_shed_hi: np.ndarray
    price_cap: float
    primal_objective: float = float("nan")

    @property
    def total_demand(self) -> np.ndarray:
        return self.demand.sum(axis=0)

    @property
    def shed_total(self) -> np.ndarray:
        return np.clip(self.shed_blocks.sum(axis=0), 0.0, self.total_demand)

    @property
    def settled_price(self) -> np.ndarray:
        return np.minimum(self.price, self.price_cap)

    @property
    def num_intervals(self) -> int:
        return self.price.shape[0]

    def unit_index(self, unit_id: str) -> int:
        return self.unit_ids.index(unit_id)


def shed_blocks(scenario, strips, price_cap: float, mode: ShedCostMode):
    """Cost and upper limit of each curtailment block for a scenario."""
    mode = ShedCostMode(mode)
    if mode == ShedCostMode.CAPPED_SETTLEMENT:
        return np.array([float(price_cap)]), scenario.total_demand[None, :].copy()
    return np.array([s.compensation_value for s in strips], dtype=float), scenario.demand.copy()


def _canonical_split(dispatch, limit, costs, order):
    """Refill equal-cost groups in unit order; leaves prices and totals unchanged."""
    out = dispatch.copy()
    for c in np.unique(costs):
        grp = [u for u in order if costs[u] == c]
        if len(grp) < 2:
            continue
        total = out[grp].sum(axis=0)
        for u in grp:
            take = np.minimum(total, limit[u])
            out[u] = take
            total = np.maximum(total - take, 0.0)
    return out


def clear_scenario(units, scenario, strips, price_cap: float,
                   shed_cost_mode: ShedCostMode = ShedCostMode.CAPPED_SETTLEMENT,
                   backend: str | None = None) -> DispatchOutcome:
    """Merit-order dispatch LP for one scenario, with duals."""
    units = list(units)
    T = scenario.num_intervals
    U = len(units)
    costs = np.array([u.variable_cost for u in units], dtype=float)
    limit = np.array([u.capacity * u.availability_in(scenario) for u in units]).reshape(U, T)
    bcost, blimit = shed_blocks(scenario, strips, price_cap, shed_cost_mode)
    B = len(bcost)

    m = Model(f"dispatch_{scenario.id}")
    p = m.add_vars(np.array([[f"p[{u.id},{t}]" for t in range(T)] for u in units], dtype=object).reshape(U, T),
                   lb=0.0, ub=limit)
    s = m.add_vars(np.array([[f"shed[{b},{t}]" for t in range(T)] for b in range(B)], dtype=object),
                   lb=0.0, ub=blimit)
    cols = np.vstack([p, s]).T  # (T, U+B)
    bal = m.add_rows(cols, 1.0, "==", scenario.total_demand, [f"balance[{t}]" for t in range(T)])
    m.set_objective(sense="min", cols=np.concatenate([p.ravel(), s.ravel()]),
                    vals=np.concatenate([np.repeat(costs, T), np.repeat(bcost, T)]))
    sol = m.solve(backend=backend)
    if sol.status != Status.OPTIMAL:
        raise DispatchError(f"dispatch LP for scenario {scenario.id} returned {sol.status.value}; "
                            "shedding makes it feasible by construction")
    x = sol.primal
    lo, hi = sol.bound_duals
    disp = np.clip(x[p], 0.0, limit)
    disp = _canonical_split(disp, limit, costs, sorted(range(U), key=lambda i: units[i].id))
    return DispatchOutcome(
        scenario_id=scenario.id, unit_ids=tuple(u.id for u in units), unit_costs=costs, gen_limit=limit,
        shed_mode=ShedCostMode(shed_cost_mode), shed_costs=bcost, shed_limit=blimit, demand=scenario.demand,
        hours=scenario.hours, price=sol.duals[bal].copy(), dispatch=disp, shed_blocks=np.clip(x[s], 0.0, blimit),
        mu_gen_lo=lo[p], mu_gen_hi=hi[p], mu_shed_lo=lo[s], mu_shed_hi=hi[s], price_cap=float(price_cap),
        primal_objective=sol.objective_value)


def clear_all(units, scenario_set, strips, market, backend=None) -> list[DispatchOutcome]:
    return [clear_scenario(units, sc, strips, market.price_cap, market.shed_cost_mode, backend)
            for sc in scenario_set.scenarios]


def objectives(outcome: DispatchOutcome) -> tuple[float, float]:
    """Primal and dual objective values recomputed from the stored solution."""
    primal = float(np.sum(outcome.unit_costs[:, None] * outcome.dispatch)
                   + np.sum(outcome.shed_costs[:, None] * outcome.shed_blocks))
    dual = float(np.sum(outcome.price * outcome.total_demand)
                 - np.sum(outcome.shed_limit * outcome.mu_shed_hi)
                 - np.sum(outcome.gen_limit * outcome.mu_gen_hi))
    return primal, dual


def verify_strong_duality(outcome: DispatchOutcome) -> float:
    """Relative gap between the primal cost and the dual objective."""
    if outcome.mu_gen_hi is None or outcome.price is None:
        raise ValueError("strong duality check needs dual values")
    primal, dual = objectives(outcome)
    return abs(primal - dual) / max(1.0, abs(primal))


@dataclass(frozen=True)
class MarginIdentityReport:
    max_residual: float  # |price*p - C*p - limit*mu_hi|
    max_slack_upper: float  # |(p - limit) * mu_hi|
    max_slack_lower: float  # |mu_lo * p|
    price_scale: float

    def ok(self, rel: float = 1e-6) -> bool:
        tol = rel * self.price_scale
        return max(self.max_residual, self.max_slack_upper, self.max_slack_lower) <= tol


def verify_lemma1(outcome: DispatchOutcome) -> MarginIdentityReport:
    """Check price*p = C*p + limit*mu_hi and the two complementary slackness identities."""
    lam = outcome.price[None, :]
    p = outcome.dispatch
    res = lam * p - outcome.unit_costs[:, None] * p - outcome.gen_limit * outcome.mu_gen_hi
    cs_hi = (p - outcome.gen_limit) * outcome.mu_gen_hi
    cs_lo = outcome.mu_gen_lo * p
    scale = max(1.0, float(np.max(np.abs(outcome.price))) if outcome.price.size else 1.0)

    def mx(a):
        return float(np.max(np.abs(a))) if a.size else 0.0
    return MarginIdentityReport(mx(res), mx(cs_hi), mx(cs_lo), scale)


@dataclass(frozen=True)
class ShedAllocation:
    mode: str
    strip_ids: tuple
    shed: np.ndarray  # (S, T)

    @property
    def total(self) -> np.ndarray:
        return self.shed.sum(axis=0)


def allocate_shed(outcome: DispatchOutcome, strips, mode: str = "priority", seed: int | None = None) -> ShedAllocation:
    """Distribute each interval's total curtailment across strips.

    ``priority`` curtails strips in ascending compensation value, ``pro_rata``
    in proportion to strip demand, ``seeded_random`` in a random strip order
    drawn per interval from ``seed``.
    """
    if mode not in ("priority", "pro_rata", "seeded_random"):
        raise ValueError(f"unknown shed allocation mode {mode!r}")
    if (mode == "seeded_random") != (seed is not None):
        raise ValueError("a seed is required for seeded_random allocation and only for it")
    demand = outcome.demand
    total = np.minimum(outcome.shed_total, demand.sum(axis=0))
    S, T = demand.shape
    shed = np.zeros((S, T))
    if mode == "pro_rata":
        tot_d = demand.sum(axis=0)
        frac = np.divide(demand, tot_d, out=np.zeros_like(demand), where=tot_d > 0)
        shed = np.minimum(frac * total, demand)
    else:
        if mode == "priority":
            order = sorted(range(S), key=lambda d: (strips[d].compensation_value, d))
            orders = [order] * T
        else:
            rng = np.random.default_rng(seed)
            orders = [list(rng.permutation(S)) for _ in range(T)]
        remaining = total.copy()
        for t in range(T):
            for d in orders[t]:
                take = min(remaining[t], demand[d, t])
                shed[d, t] = take
                remaining[t] -= take
    return ShedAllocation(mode, tuple(s.id for s in strips), shed)


@dataclass(frozen=True)
class Settlement:
    settled_prices: list  # per scenario (T,)
    consumer_energy_cost: np.ndarray  # per scenario $
    unit_margins: np.ndarray  # (scenarios, U) $ of (settled - C) * p
    probabilities: np.ndarray
    unit_ids: tuple

    @property
    def expected_consumer_energy_cost(self) -> float:
        return float(self.probabilities @ self.consumer_energy_cost)

    @property
    def expected_unit_margins(self) -> np.ndarray:
        return self.probabilities @ self.unit_margins


def settle(outcomes, probabilities, price_cap: float | None = None) -> Settlement:
    """Settle every scenario at ``min(price, cap)``."""
    prices, costs, margins = [], [], []
    for o in outcomes:
        cap = o.price_cap if price_cap is None else price_cap
        sp = np.minimum(o.price, cap)
        served = o.total_demand - o.shed_total
        prices.append(sp)
        costs.append(float(np.sum(sp * served * o.hours)))
        margins.append(np.sum((sp[None, :] - o.unit_costs[:, None]) * o.dispatch * o.hours[None, :], axis=1))
    return Settlement(prices, np.array(costs), np.array(margins), np.asarray(probabilities, float),
                      outcomes[0].unit_ids if outcomes else ())


def corrupt_duals(outcome: DispatchOutcome, scale: float = 0.5) -> DispatchOutcome:
    """Copy of ``outcome`` with the generator upper-bound duals perturbed (negative control)."""
    return replace(outcome, mu_gen_hi=outcome.mu_gen_hi * (1.0 + scale) + scale)
