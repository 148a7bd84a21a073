"""Brute-force and analytic reference computations used to validate the solvers.

Nothing here touches the solver layer or the optimisation modules: dispatch is
merit-order stacking, CVaR is a sorted tail average, capacity and contract
problems are solved by enumeration, and Ward linkage recomputes every
pairwise merge cost from scratch.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

GRID_LIMIT = 100_000


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    method: str
    value: object
    size: int
    wall_time: float


def tail_cvar(profits, probs, alpha: float) -> float:
    """Probability-weighted mean of the worst ``1 - alpha`` mass, splitting the boundary atom."""
    x = np.asarray(profits, dtype=float)
    p = np.asarray(probs, dtype=float)
    order = np.argsort(x, kind="stable")
    need = 1.0 - alpha
    acc = 0.0
    total = 0.0
    for i in order:
        take = min(p[i], need - acc)
        if take <= 0:
            break
        total += take * x[i]
        acc += take
    return total / need


def reference_dispatch(costs, limits, demand: float, shed_costs, shed_limits):
    """Single-interval merit-order clearing.

    Generators and shed blocks are stacked by cost (ties in listed order,
    generators before shed) until demand is met.  Returns ``(price, dispatch,
    shed, mu_hi)``.  When demand lands exactly on a block boundary the price is
    the cost of the next block, the largest price supported by a dual solution.
    """
    c = np.concatenate([np.asarray(costs, float), np.asarray(shed_costs, float)])
    L = np.concatenate([np.asarray(limits, float), np.asarray(shed_limits, float)])
    ng = len(costs)
    order = np.argsort(c, kind="stable")
    remaining = float(demand)
    out = np.zeros_like(L)
    price = c[order[0]]
    tol = 1e-9 * max(1.0, abs(demand))
    for pos, i in enumerate(order):
        take = min(L[i], max(remaining, 0.0))
        out[i] = take
        remaining -= take
        if remaining <= tol:
            price = c[i]
            if abs(take - L[i]) <= tol:
                nxt = [j for j in order[pos + 1:] if L[j] > 0]
                if nxt:
                    price = c[nxt[0]]
            break
    mu_hi = np.maximum(price - c, 0.0) * (out >= L - tol) * (L > 0)
    return float(price), out[:ng], out[ng:], mu_hi[:ng]


def merit_order_clear(costs, limits, demand, shed_costs, shed_limits):
    """Vectorised :func:`reference_dispatch` over intervals; ``limits`` are (U, T)."""
    c = np.concatenate([np.asarray(costs, float), np.asarray(shed_costs, float)])
    L = np.vstack([np.asarray(limits, float), np.asarray(shed_limits, float)])
    D = np.asarray(demand, dtype=float)
    order = np.argsort(c, kind="stable")
    cs, Ls = c[order], L[order]
    cum = np.cumsum(Ls, axis=0)
    before = cum - Ls
    disp = np.clip(D[None, :] - before, 0.0, Ls)
    tol = 1e-9 * np.maximum(1.0, np.abs(D))
    reached = cum >= D[None, :] - tol[None, :]
    j = np.argmax(reached, axis=0)
    T = D.size
    price = cs[j].copy()
    full = np.abs(disp[j, np.arange(T)] - Ls[j, np.arange(T)]) <= tol
    for t in np.nonzero(full)[0]:
        nxt = np.nonzero(Ls[j[t] + 1:, t] > 0)[0]
        if nxt.size:
            price[t] = cs[j[t] + 1 + nxt[0]]
    back = np.empty_like(disp)
    back[order] = disp
    ng = len(costs)
    return price, back[:ng], back[ng:]


def _shed_blocks(instance, sc):
    if str(getattr(instance.shed_cost_mode, "value", instance.shed_cost_mode)) == "capped_settlement":
        return np.array([instance.price_cap]), sc.total_demand[None, :]
    return np.array([s.compensation_value for s in instance.strips]), sc.demand


def gmp_profits(instance, capacity: float) -> np.ndarray:
    """Per-scenario annual profit of the acting unit at ``capacity`` by merit-order clearing."""
    tech = instance.unit.tech
    out = []
    for sc in instance.scenario_set.scenarios:
        fleet = [(tech.variable_cost, capacity * instance.unit.availability_in(sc))]
        fleet += [(r.tech.variable_cost, r.capacity * r.availability_in(sc)) for r in instance.rivals]
        bc, bl = _shed_blocks(instance, sc)
        price, disp, _ = merit_order_clear([f[0] for f in fleet], np.vstack([f[1] for f in fleet]),
                                           sc.total_demand, bc, bl)
        margin = float(np.sum((price - tech.variable_cost) * disp[0] * sc.hours))
        out.append(margin - tech.fixed_cost * capacity)
    return np.array(out)


def grid_search_gmp(instance, grid=None) -> OracleResult:
    """Exhaustive best capacity over a grid; infeasible points are skipped, 0 MW is the fallback.

    ``value`` is ``(capacity, utility, table)`` with one row per grid point of
    (capacity, mean, cvar, utility, financeable).
    """
    t0 = time.perf_counter()
    tech = instance.unit.tech
    grid = np.asarray(instance.step * np.arange(2 ** instance.bits) if grid is None else grid, dtype=float)
    if grid.size > GRID_LIMIT:
        raise OracleSizeError(f"grid of {grid.size} points exceeds the {GRID_LIMIT} limit")
    probs = instance.scenario_set.probabilities
    beta, alpha = tech.risk_weight, tech.cvar_confidence
    wacc = tech.equity_rate * (1 - tech.gearing) + tech.gearing * tech.debt_rate
    rows = []
    best = (0.0, 0.0)
    best_u = -np.inf
    for cap in grid:
        psi = gmp_profits(instance, cap)
        mean = float(probs @ psi)
        cv = tail_cvar(psi, probs, alpha)
        u = (1 - beta) * mean + beta * cv
        capital = tech.investment_cost * cap
        scale = max(1.0, capital)
        ok = mean - wacc * capital >= -1e-6 * scale and cv - tech.debt_rate * tech.gearing * capital >= -1e-6 * scale
        rows.append((cap, mean, cv, u, ok))
        if ok and (best_u == -np.inf or u > best_u + 1e-9 * max(1.0, abs(best_u))):
            best_u, best = u, (cap, u)
    if best_u == -np.inf:
        best = (0.0, 0.0)
    return OracleResult("grid_search_gmp", (best[0], best[1], rows), int(grid.size), time.perf_counter() - t0)


def brute_ward(features, k: int):
    """Ward linkage by recomputing every cluster pair's SSE increase at each step.

    Returns the merge list [(members_a, members_b, cost)] and final labels.
    Ties go to the pair whose smallest member indices are lexicographically first.
    """
    X = np.asarray(features, dtype=float)
    clusters = [[i] for i in range(len(X))]
    merges = []
    while len(clusters) > k:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            A, B = X[clusters[a]], X[clusters[b]]
            na, nb = len(A), len(B)
            d = A.mean(axis=0) - B.mean(axis=0)
            cost = na * nb / (na + nb) * float(d @ d)
            if best is None or cost < best[0] - 1e-12 * max(1.0, best[0]):
                best = (cost, a, b)
        cost, a, b = best
        merges.append((sorted(clusters[a]), sorted(clusters[b]), cost))
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    labels = np.empty(len(X), dtype=int)
    for lab, members in enumerate(sorted(clusters, key=min)):
        labels[members] = lab
    return merges, labels


def ins_profits(inp, q, contracted_mw: float, link: str = "paper_literal_link") -> np.ndarray:
    """Per-scenario IOLR profit for contract vector ``q`` and total contracted MW.

    ``contracted_mw`` is the sum of contracted capacity; its availability cost
    must be supplied by the caller through ``inp.availability_cost(total)``.
    """
    q = np.asarray(q, dtype=float)
    premium = float(np.sum(q * inp.premium_rates * inp.strip_peaks))
    out = []
    for shed, hours in zip(inp.shed, inp.hours):
        gamma = uncovered_shed(shed, contracted_mw, inp.compensation_values, link)
        payout = float(np.sum(q[:, None] * inp.compensation_values[:, None] * gamma * hours[None, :]))
        out.append(premium - payout)
    return np.array(out)


def uncovered_shed(shed, contracted_mw: float, comp, link: str) -> np.ndarray:
    """Ex-post curtailment per strip once ``contracted_mw`` is dispatched.

    ``paper_literal_link`` nets the full contracted MW off each strip
    separately; ``cascade_link`` restores strips in descending compensation
    order.
    """
    shed = np.asarray(shed, dtype=float)
    if link == "paper_literal_link":
        return np.maximum(0.0, shed - contracted_mw)
    left = np.full(shed.shape[1], float(contracted_mw))
    gamma = np.zeros_like(shed)
    for d in sorted(range(shed.shape[0]), key=lambda i: (-comp[i], i)):
        used = np.minimum(shed[d], left)
        gamma[d] = shed[d] - used
        left = left - used
    return gamma


def ins_enumerate(inp, link: str = "paper_literal_link", eom: bool = False, max_size: int = GRID_LIMIT) -> OracleResult:
    """Exact IOLR optimum by enumerating every contract vector and every contracted-MW step.

    Contracted capacity is bought from the cheapest candidate, so only the
    total matters.  ``value`` is ``(q, total_mw, utility, psi)``.
    """
    t0 = time.perf_counter()
    n_strips = len(inp.premium_rates)
    qs = [np.zeros(n_strips, dtype=int)] if eom else [np.array(b) for b in itertools.product((0, 1), repeat=n_strips)]
    grid = inp.capacity_grid()
    size = len(qs) * len(grid)
    if size > max_size:
        raise OracleSizeError(f"{size} enumeration points exceed the {max_size} limit")
    probs = inp.probabilities
    alpha, beta = inp.iolr.cvar_confidence, inp.iolr.risk_weight
    phi = inp.iolr.technical_reserves
    unit_cost = inp.cheapest_availability_price
    best = None
    for q in qs:
        for mw in grid:
            psi = ins_profits(inp, q, mw, link) - unit_cost * mw
            mean = float(probs @ psi)
            cv = tail_cvar(psi, probs, alpha)
            scale = max(1.0, abs(phi), float(np.max(np.abs(psi))))
            if mean < -1e-9 * scale or cv + phi < -1e-9 * scale:
                continue
            u = (1 - beta) * mean + beta * cv
            key = (u, -int(q.sum()), -mw)
            if best is None or u > best[0][0] + 1e-9 * max(1.0, abs(best[0][0])) or (
                    abs(u - best[0][0]) <= 1e-9 * max(1.0, abs(best[0][0])) and key > best[0]):
                best = (key, q.copy(), float(mw), u, psi)
    _, q, mw, u, psi = best
    return OracleResult("ins_enumerate", (q, mw, u, psi), size, time.perf_counter() - t0)
