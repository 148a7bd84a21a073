"""Diagonalisation to a joint generator / insurer equilibrium.

Inner loop: Gauss-Seidel best responses of the independent generators in
ascending id order, each seeing its rivals' latest capacities plus the fixed
VRE fleet and the insurer's contracted units.  Outer loop: dispatch the inner
equilibrium, hand the resulting strip curtailment to the insurer, add its
contracted units to the fleet and repeat until the insurer's decision stops
moving.

By default the insurer's portfolio is re-optimised from scratch each outer
round (``contract_update="replace"``): the curtailment it sees is the one left
by independents and VRE alone, and its new portfolio replaces the old one.
``"accumulate"`` instead keeps every earlier portfolio in the fleet and adds
the new one on top.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dispatch import allocate_shed, clear_scenario
from .gmp import GmpInstance, evaluate_capacity, solve_gmp
from .ins import InsInput, evaluate_decision, solve_ins
from .model import Design, GeneratorUnit, IolrConfig, MarketConfig, UnitKind
from .risk import cvar

CONVERGED = "converged"
OSCILLATING = "oscillating"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class MarketProblem:
    scenario_set: object
    strips: tuple
    independents: tuple  # GeneratorUnit, capacities are decisions
    vre: tuple = ()  # fixed units
    candidates: tuple = ()  # GeneratorTech the insurer may contract
    market: MarketConfig = field(default_factory=MarketConfig)
    iolr: IolrConfig = field(default_factory=IolrConfig)
    link: str = "paper_literal_link"
    contract_update: str = "replace"
    integral_contracts: bool = True

    @property
    def design(self) -> Design:
        return Design(self.market.design)

    def with_design(self, design) -> "MarketProblem":
        return replace(self, market=replace(self.market, design=Design(design)))

    def ordered_ids(self) -> list[str]:
        return sorted(u.id for u in self.independents)

    def unit(self, uid: str) -> GeneratorUnit:
        return next(u for u in self.independents if u.id == uid)

    def fleet(self, caps: dict, contracted=()) -> list:
        return [self.unit(i).with_capacity(caps[i]) for i in self.ordered_ids()] + list(self.vre) + list(contracted)

    def gmp_instance(self, uid: str, caps: dict, contracted=()) -> GmpInstance:
        rivals = tuple(self.unit(i).with_capacity(caps[i]) for i in self.ordered_ids() if i != uid)
        return GmpInstance(self.unit(uid), rivals + tuple(self.vre) + tuple(contracted), self.scenario_set,
                           self.strips, self.market.price_cap, self.market.shed_cost_mode)

    def allocation_mode(self) -> str:
        return "priority" if self.design == Design.EIM else self.market.eom_allocation

    def allocate(self, outcome, scenario_index: int):
        mode = self.allocation_mode()
        seed = self.market.seed * 1_000_003 + scenario_index if mode == "seeded_random" else None
        return allocate_shed(outcome, self.strips, mode, seed)

    def clear(self, caps: dict, contracted=(), backend=None) -> list:
        fleet = self.fleet(caps, contracted)
        return [clear_scenario(fleet, sc, self.strips, self.market.price_cap, self.market.shed_cost_mode, backend)
                for sc in self.scenario_set.scenarios]

    def ins_input(self, allocations) -> InsInput:
        return InsInput.from_outcomes([a.shed for a in allocations], [sc.hours for sc in self.scenario_set.scenarios],
                                      self.scenario_set.probabilities, self.strips, self.candidates, self.iolr,
                                      self.integral_contracts)


def _tech_of(unit_id: str) -> str:
    return unit_id[len("iolr_"):].split("@")[0]


def contracted_units(decision_mw: dict, techs, tag: str = "") -> list:
    by_name = {t.name: t for t in techs}
    return [GeneratorUnit(f"iolr_{name}{tag}", by_name[name], UnitKind.IOLR_CONTRACTED, float(mw))
            for name, mw in sorted(decision_mw.items()) if mw > 0]


@dataclass(frozen=True)
class OscillationReport:
    period: int | None  # smallest revisit period, None when no cycle found
    band: tuple  # (min, max) total capacity over the window
    average: float
    window: tuple  # (first, last) sweep index of the window, inclusive

    @property
    def cycling(self) -> bool:
        return self.period is not None


def detect_oscillation(trace) -> OscillationReport:
    """Find the shortest exact revisit of the last capacity vector, else summarise the last half.

    ``trace`` is a sequence of capacity vectors, one per sweep.
    """
    vecs = [tuple(float(x) for x in v) for v in trace]
    if len(vecs) < 1:
        raise ValueError("empty trace")
    totals = np.array([sum(v) for v in vecs])
    last = len(vecs) - 1
    period = None
    for p in range(2, len(vecs)):
        if vecs[last - p] == vecs[last] and any(vecs[i] != vecs[last] for i in range(last - p + 1, last)):
            period = p
            break
    if period is not None:
        lo = last - period + 1
    else:
        lo = len(vecs) // 2
    win = totals[lo:]
    return OscillationReport(period, (float(win.min()), float(win.max())), float(win.mean()), (lo, last))


@dataclass
class EquilibriumState:
    design: str
    status: str = ITERATION_LIMIT
    capacities: dict = field(default_factory=dict)
    contracted: dict = field(default_factory=dict)  # unit id -> MW currently in the fleet
    contracts: dict = field(default_factory=dict)  # strip id -> 0/1
    outer_iterations: int = 0
    sweeps: list = field(default_factory=list)  # {"outer", "inner", "capacities"}
    solves: list = field(default_factory=list)  # one record per agent solve
    iolr: list = field(default_factory=list)  # one decision record per outer iteration
    deltas: list = field(default_factory=list)  # per outer: capacity, contract and MW deltas
    oscillation: dict | None = None
    start: str = "zero"
    timings: list = field(default_factory=list, repr=False)  # wall time per solve, kept out of reports

    def to_json(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "EquilibriumState":
        doc = dict(doc)
        doc.setdefault("timings", [])
        return cls(**doc)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))
        return path

    @property
    def total_independent(self) -> float:
        return float(sum(self.capacities.values()))

    @property
    def total_contracted(self) -> float:
        return float(sum(self.contracted.values()))

    def contracted_fleet(self, problem: MarketProblem) -> list:
        by_name = {t.name: t for t in problem.candidates}
        out = []
        for uid, mw in sorted(self.contracted.items()):
            out.append(GeneratorUnit(uid, by_name[_tech_of(uid)], UnitKind.IOLR_CONTRACTED, float(mw)))
        return out


def initial_capacities(problem: MarketProblem, start: str, seed: int = 0) -> dict:
    ids = problem.ordered_ids()
    if start == "zero":
        return {i: 0.0 for i in ids}
    if start == "max":
        return {i: float(problem.unit(i).tech.max_capacity) for i in ids}
    if start.startswith("random"):
        k = int(start[len("random"):] or 0)
        rng = np.random.default_rng([seed, k])
        out = {}
        for i in ids:
            t = problem.unit(i).tech
            out[i] = float(t.capacity_step * rng.integers(0, 2 ** t.expansion_bits))
        return out
    raise ValueError(f"unknown start {start!r}")


def _log(log, rec):
    if log is not None:
        log.write(json.dumps(rec, sort_keys=True) + "\n")
        log.flush()


def run(problem: MarketProblem, start: str = "zero", initial: dict | None = None, backend: str | None = None,
        log=None) -> EquilibriumState:
    """Iterate best responses and insurer decisions until a joint fixed point or a limit."""
    mk = problem.market
    caps = dict(initial) if initial is not None else initial_capacities(problem, start, mk.seed)
    state = EquilibriumState(design=problem.design.value, start=start)
    contracted = []  # units in the fleet
    prev_q = np.zeros(len(problem.strips), dtype=int)
    prev_mw = np.zeros(len(problem.candidates))
    eom = problem.design == Design.EOM
    rounds = []  # (independent capacities..., contracted MW...) after each outer round
    cache = {}  # identical best-response instances are solved once
    for m in range(mk.max_outer_iters):
        state.outer_iterations = m + 1
        seen = [tuple(caps[i] for i in problem.ordered_ids())]
        state.sweeps.append({"outer": m, "inner": 0, "capacities": dict(caps)})
        inner_status = ITERATION_LIMIT
        for n in range(1, mk.max_inner_iters + 1):
            before = dict(caps)
            for uid in problem.ordered_ids():
                key = (uid, tuple(caps[i] for i in problem.ordered_ids() if i != uid),
                       tuple((u.id, u.capacity) for u in contracted))
                t0 = time.perf_counter()
                hit = key in cache
                if not hit:
                    inst = problem.gmp_instance(uid, caps, contracted)
                    cache[key] = solve_gmp(inst, gap=mk.optimality_gap, time_limit=mk.time_limit, backend=backend)
                sol = cache[key]
                dt = time.perf_counter() - t0
                caps[uid] = sol.capacity
                rec = {"outer": m, "inner": n, "unit": uid, "capacity": sol.capacity, "utility": sol.utility,
                       "mean_profit": sol.mean_profit, "cvar": sol.risk.cvar, "gap": sol.gap, "status": sol.status,
                       "reused": hit}
                state.solves.append(rec)
                state.timings.append({"outer": m, "inner": n, "unit": uid, "seconds": dt})
                _log(log, dict(rec, seconds=dt))
            state.sweeps.append({"outer": m, "inner": n, "capacities": dict(caps)})
            vec = tuple(caps[i] for i in problem.ordered_ids())
            delta = max(abs(caps[i] - before[i]) for i in caps) if caps else 0.0
            if delta <= mk.eps_capacity:
                inner_status = CONVERGED
                break
            if vec in seen:
                inner_status = OSCILLATING
                break
            seen.append(vec)
        sweep_vecs = [[s["capacities"][i] for i in problem.ordered_ids()] for s in state.sweeps if s["outer"] == m]
        if inner_status != CONVERGED:
            state.status = inner_status
            state.capacities = dict(caps)
            osc = detect_oscillation(sweep_vecs)
            state.oscillation = {"period": osc.period, "band": list(osc.band), "average": osc.average,
                                 "window": list(osc.window), "outer": m}
            state.contracted = {u.id: u.capacity for u in contracted}
            return state

        # insurer's turn
        base = contracted if problem.contract_update == "accumulate" else []
        outcomes = problem.clear(caps, base, backend)
        allocs = [problem.allocate(o, w) for w, o in enumerate(outcomes)]
        inp = problem.ins_input(allocs)
        dec = solve_ins(inp, problem.link, eom=eom, gap=min(mk.optimality_gap, 1e-4), backend=backend)
        mw = np.array([dec.contracted[t.name] for t in problem.candidates])
        d_q = float(np.max(np.abs(dec.contracts - prev_q), initial=0.0))
        d_mw = float(np.max(np.abs(mw - prev_mw), initial=0.0))
        state.iolr.append(dict(dec.to_json(inp.strip_ids), outer=m))
        state.deltas.append({"outer": m, "contracts": d_q, "contracted_mw": d_mw})
        state.contracts = {sid: int(c) for sid, c in zip(inp.strip_ids, dec.contracts)}
        if problem.contract_update == "accumulate":
            if d_q <= mk.eps_q and float(mw.sum()) <= mk.eps_contract:
                state.status = CONVERGED
                break
            contracted = contracted + contracted_units(dec.contracted, problem.candidates, f"@{m}")
            prev_q = dec.contracts
            continue
        new = contracted_units(dec.contracted, problem.candidates)
        converged = d_q <= mk.eps_q and d_mw <= mk.eps_contract
        if converged:
            state.status = CONVERGED
            contracted = new
            break
        contracted = new
        prev_q, prev_mw = dec.contracts.copy(), mw
        vec = tuple(caps[i] for i in problem.ordered_ids()) + tuple(float(x) for x in mw) + tuple(
            float(x) for x in dec.contracts)
        if vec in rounds:
            rounds.append(vec)
            n_cap = len(problem.ordered_ids()) + len(mw)
            osc = detect_oscillation([v[:n_cap] for v in rounds])
            state.status = OSCILLATING
            state.oscillation = {"period": osc.period, "band": list(osc.band), "average": osc.average,
                                 "window": list(osc.window), "outer": None}
            break
        rounds.append(vec)
    else:
        state.status = ITERATION_LIMIT
    state.capacities = dict(caps)
    state.contracted = {u.id: u.capacity for u in contracted}
    return state


def run_multistart(problem: MarketProblem, starts=("zero", "max", "random1", "random2"), backend=None) -> list:
    """Run from several initial capacity vectors; equilibria can then be compared."""
    return [run(problem, start=s, backend=backend) for s in starts]


@dataclass(frozen=True)
class DeviationReport:
    gains: dict  # agent -> absolute utility gain from the best unilateral deviation
    relative: dict  # agent -> gain / max(1, |utility|)
    best_responses: dict  # agent -> deviating decision
    tolerance: float
    skipped: tuple = ()

    @property
    def max_relative_gain(self) -> float:
        return max(self.relative.values(), default=0.0)

    @property
    def certified(self) -> bool:
        return self.max_relative_gain <= self.tolerance


def verify_equilibrium(state: EquilibriumState, problem: MarketProblem, method: str = "resolve",
                       tolerance: float | None = None, backend: str | None = None) -> DeviationReport:
    """Best unilateral deviation of each agent with everyone else held at the state.

    ``method="resolve"`` re-solves each generator's MILP; ``"grid"`` enumerates
    its capacity grid by merit-order clearing.  The insurer is re-solved
    against the curtailment it would face, except under EOM where its
    contracts are forced to zero.
    """
    from .oracles import gmp_profits, grid_search_gmp, tail_cvar  # independent route for small instances

    tol = problem.market.optimality_gap if tolerance is None else tolerance
    caps = dict(state.capacities)
    contracted = state.contracted_fleet(problem)
    gains, rel, best = {}, {}, {}
    for uid in problem.ordered_ids():
        inst = problem.gmp_instance(uid, caps, contracted)
        tech = inst.tech
        if method == "grid":
            res = grid_search_gmp(inst).value
            psi = gmp_profits(inst, caps[uid])
            probs = inst.scenario_set.probabilities
            cur = (1 - tech.risk_weight) * float(probs @ psi) + tech.risk_weight * tail_cvar(psi, probs, tech.cvar_confidence)
            top, cap_best = res[1], res[0]
        else:
            ev = evaluate_capacity(inst, caps[uid], backend)
            cur = ev.utility if ev.feasible else -np.inf
            sol = solve_gmp(inst, gap=min(tol, 1e-4), backend=backend)
            top, cap_best = evaluate_capacity(inst, sol.capacity, backend).utility, sol.capacity
        g = max(0.0, top - cur) if np.isfinite(cur) else np.inf
        gains[uid] = g
        rel[uid] = g / max(1.0, abs(top))
        best[uid] = cap_best
    skipped = ()
    if problem.design == Design.EOM:
        skipped = ("iolr",)
    else:
        accumulate = problem.contract_update == "accumulate"
        outcomes = problem.clear(caps, contracted if accumulate else [], backend)
        allocs = [problem.allocate(o, w) for w, o in enumerate(outcomes)]
        inp = problem.ins_input(allocs)
        q = np.array([state.contracts.get(sid, 0) for sid in inp.strip_ids])
        if accumulate:
            # earlier portfolios are already in the fleet; the open decision is the next increment
            mw = np.zeros(len(problem.candidates))
        else:
            mw = np.array([sum(v for k, v in state.contracted.items() if _tech_of(k) == t.name)
                           for t in problem.candidates])
        psi, _ = evaluate_decision(inp, q, mw, problem.link)
        r = cvar(psi, inp.probabilities, problem.iolr.cvar_confidence)
        cur = (1 - problem.iolr.risk_weight) * r.mean_profit + problem.iolr.risk_weight * r.cvar
        dec = solve_ins(inp, problem.link, gap=min(tol, 1e-6), backend=backend)
        g = max(0.0, dec.utility - cur)
        gains["iolr"] = g
        rel["iolr"] = g / max(1.0, abs(dec.utility))
        best["iolr"] = {"contracts": dec.contracts.tolist(), "contracted": dec.contracted}
    return DeviationReport(gains, rel, best, tol, skipped)
