"""Single-level MILP for an independent generator's capacity decision.

The generator maximises ``(1 - beta) E[profit] + beta CVaR(profit)`` while the
market clears as the dispatch LP.  The lower level is embedded through its
primal constraints, its dual constraints and a strong-duality equality per
scenario.  Two bilinear terms are removed:

* ``price * p`` in the profit is replaced by ``C * p + Pmax * A * mu_hi``
  (complementary slackness at the lower-level optimum), so the operating
  margin equals ``Pmax * A * mu_hi``;
* ``Pmax * mu_hi`` is expanded with ``Pmax = step * sum_k 2**k b_k``
  (k = 0..K-1) and each ``b_k * mu_hi`` is replaced by a McCormick envelope,
  exact for binary x bounded continuous.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dispatch import DispatchOutcome, clear_scenario, shed_blocks
from .model import GeneratorUnit, ShedCostMode
from .risk import FinancingCheck, RiskAssessment, add_cvar_rows, cvar, financing_check
from .solver import INF, Model, Solution


class GmpBuildError(ValueError):
    pass


class GmpSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class GmpInstance:
    unit: GeneratorUnit  # acting generator; its capacity is the decision
    rivals: tuple  # every other unit, capacities fixed
    scenario_set: object
    strips: tuple
    price_cap: float = 2000.0
    shed_cost_mode: ShedCostMode = ShedCostMode.CAPPED_SETTLEMENT

    @property
    def tech(self):
        return self.unit.tech

    @property
    def bits(self) -> int:
        return int(self.tech.expansion_bits)

    @property
    def step(self) -> float:
        return float(self.tech.capacity_step)

    @property
    def bit_values(self) -> np.ndarray:
        return self.step * 2.0 ** np.arange(self.bits)

    def capacity_grid(self) -> np.ndarray:
        return self.step * np.arange(2 ** self.bits)

    def dual_ceiling(self) -> float:
        """Largest price any dual solution needs; bounds mu_hi of the acting unit."""
        if ShedCostMode(self.shed_cost_mode) == ShedCostMode.CAPPED_SETTLEMENT:
            return float(self.price_cap)
        return float(max(s.compensation_value for s in self.strips))

    def fleet(self, capacity: float) -> list:
        return [self.unit.with_capacity(capacity)] + list(self.rivals)


@dataclass
class GmpModel:
    model: Model
    instance: GmpInstance
    bits: np.ndarray
    psi: np.ndarray
    cvar_cols: np.ndarray
    cvar_vals: np.ndarray
    z: int
    blocks: list  # per scenario dict of index arrays
    counts: dict = field(default_factory=dict)


def build_gmp(instance: GmpInstance) -> GmpModel:
    inst = instance
    tech = inst.tech
    M = inst.dual_ceiling() - tech.variable_cost
    if not np.isfinite(M) or M <= 0:
        raise GmpBuildError(f"no finite positive bound for the capacity dual of {inst.unit.id} "
                            f"(ceiling {inst.dual_ceiling()}, cost {tech.variable_cost}); "
                            "McCormick envelopes need one")
    K = inst.bits
    bv = inst.bit_values
    probs = inst.scenario_set.probabilities
    m = Model(f"gmp_{inst.unit.id}")
    b = m.add_vars([f"b[{k}]" for k in range(K)], lb=0.0, ub=1.0, kind="binary")
    psi = m.add_vars([f"psi[{w}]" for w in range(len(probs))], lb=-INF, ub=INF)
    rivals = list(inst.rivals)
    R = len(rivals)
    rc = np.array([r.variable_cost for r in rivals], dtype=float)
    blocks = []
    n_env = 0
    for w, sc in enumerate(inst.scenario_set.scenarios):
        T = sc.num_intervals
        tg = f"{w}"
        A = inst.unit.availability_in(sc)
        rl = np.array([r.capacity * r.availability_in(sc) for r in rivals]).reshape(R, T)
        bc, bl = shed_blocks(sc, inst.strips, inst.price_cap, inst.shed_cost_mode)
        B = len(bc)
        D = sc.total_demand
        tt = np.arange(T)

        def names(stem, *dims):
            if not dims:
                return [f"{stem}[{tg},{t}]" for t in tt]
            return np.array([[f"{stem}[{tg},{i},{t}]" for t in tt] for i in range(dims[0])], dtype=object
                            ).reshape(dims[0], T)
        pg = m.add_vars(names("pg"), lb=0.0)
        pr = m.add_vars(names("pr", R), lb=0.0, ub=rl) if R else np.zeros((0, T), dtype=int)
        sh = m.add_vars(names("sh", B), lb=0.0, ub=bl)
        lam = m.add_vars(names("lam"), lb=-INF, ub=INF)
        mlo = m.add_vars(names("mulo"), lb=0.0)
        mhi = m.add_vars(names("muhi"), lb=0.0, ub=M)
        rlo = m.add_vars(names("rmulo", R), lb=0.0) if R else np.zeros((0, T), dtype=int)
        rhi = m.add_vars(names("rmuhi", R), lb=0.0) if R else np.zeros((0, T), dtype=int)
        slo = m.add_vars(names("smulo", B), lb=0.0)
        shi = m.add_vars(names("smuhi", B), lb=0.0)
        wk = m.add_vars(names("w", K), lb=0.0, ub=M)

        # lower-level primal
        m.add_rows(np.vstack([pg[None, :], pr, sh]).T, 1.0, "==", D, names("balance"))
        m.add_rows(np.column_stack([pg, np.tile(b, (T, 1))]),
                   np.column_stack([np.ones(T), -A[:, None] * bv[None, :]]), "<=", 0.0, names("cap"))
        # lower-level dual: C - lam + mu_hi - mu_lo = 0
        m.add_rows(np.column_stack([lam, mlo, mhi]), [-1.0, -1.0, 1.0], "==",
                   -tech.variable_cost, names("dual_g"))
        if R:
            m.add_rows(np.column_stack([np.tile(lam, R), rlo.ravel(), rhi.ravel()]), [-1.0, -1.0, 1.0], "==",
                       -np.repeat(rc, T), list(np.asarray(names("dual_r", R)).ravel()))
        m.add_rows(np.column_stack([np.tile(lam, B), slo.ravel(), shi.ravel()]), [-1.0, -1.0, 1.0], "==",
                   -np.repeat(bc, T), list(np.asarray(names("dual_sh", B)).ravel()))
        # McCormick envelope of w_kt = b_k * mu_hi_t, four rows per (k, t)
        bk = np.repeat(b, T)
        mh = np.tile(mhi, K)
        wf = wk.ravel()
        env = list(np.asarray(names("env", K)).ravel())
        m.add_rows(np.column_stack([wf, bk]), [1.0, -M], "<=", 0.0, [n + "a" for n in env])
        m.add_rows(np.column_stack([wf, mh]), [1.0, -1.0], "<=", 0.0, [n + "b" for n in env])
        m.add_rows(np.column_stack([wf, mh, bk]), [1.0, -1.0, -M], ">=", -M, [n + "c" for n in env])
        m.add_rows(wf[:, None], [1.0], ">=", 0.0, [n + "d" for n in env])
        n_env += 4 * K * T
        # strong duality, one row per interval: the dispatch LP has no inter-temporal coupling,
        # so primal cost equals dual objective interval by interval (sparser and a tighter relaxation)
        sd_cols = [pg[:, None], pr.T, sh.T, lam[:, None], shi.T, rhi.T, wk.T]
        sd_vals = [np.full((T, 1), tech.variable_cost), np.tile(rc, (T, 1)), np.tile(bc, (T, 1)), -D[:, None],
                   bl.T, rl.T, (A[None, :] * bv[:, None]).T]
        sd_cols = np.hstack([c.reshape(T, -1) for c in sd_cols])
        sd_vals = np.hstack([v.reshape(T, -1) for v in sd_vals])
        # each row is divided by its largest coefficient so the feasibility tolerance acts relatively
        scale = np.maximum(np.max(np.abs(sd_vals), axis=1, keepdims=True), 1.0)
        m.add_rows(sd_cols, sd_vals / scale, "==", 0.0, names("strong_duality"))
        # profit = sum_t h_t * A_t * Pmax * mu_hi_t - fixed cost * Pmax
        pcols = np.concatenate([[psi[w]], wf, b])
        pvals = np.concatenate([[1.0], -(sc.hours[None, :] * A[None, :] * bv[:, None]).ravel(),
                                tech.fixed_cost * bv])
        m.add_rows(pcols[None, :], pvals[None, :] / np.max(np.abs(pvals)), "==", 0.0, [f"profit[{tg}]"])
        blocks.append(dict(pg=pg, pr=pr, sh=sh, lam=lam, mlo=mlo, mhi=mhi, rlo=rlo, rhi=rhi, slo=slo,
                           shi=shi, w=wk, A=A, rl=rl, bc=bc, bl=bl))

    alpha, beta = tech.cvar_confidence, tech.risk_weight
    z, rho, ccols, cvals = add_cvar_rows(m, psi, probs, alpha, "cvar")
    capital = tech.investment_cost * bv
    m.add_rows(np.concatenate([psi, b])[None, :], np.concatenate([probs, -tech.wacc * capital])[None, :],
               ">=", 0.0, ["finance_equity"])
    m.add_rows(np.concatenate([ccols, b])[None, :],
               np.concatenate([cvals, -tech.debt_rate * tech.gearing * capital])[None, :], ">=", 0.0,
               ["finance_debt"])
    m.set_objective(sense="max", cols=np.concatenate([psi, ccols]),
                    vals=np.concatenate([(1.0 - beta) * probs, beta * cvals]))
    counts = {"balance_rows": sum(sc.num_intervals for sc in inst.scenario_set.scenarios),
              "binaries": K, "products": int(sum(bl["w"].size for bl in blocks)), "envelope_rows": n_env}
    return GmpModel(m, inst, b, psi, ccols, cvals, z, blocks, counts)


@dataclass
class GmpSolution:
    unit_id: str
    capacity: float
    bits: np.ndarray
    profits: np.ndarray
    risk: RiskAssessment
    utility: float
    financing: FinancingCheck
    embedded: list  # DispatchOutcome per scenario, as seen inside the MILP
    products: list  # (K, T) envelope variables per scenario
    objective_value: float
    gap: float
    status: str
    milp_cvar: float

    @property
    def mean_profit(self) -> float:
        return self.risk.mean_profit


def _utility(beta: float, risk: RiskAssessment) -> float:
    return (1.0 - beta) * risk.mean_profit + beta * risk.cvar


def solution_from(gm: GmpModel, sol: Solution) -> GmpSolution:
    inst = gm.instance
    tech = inst.tech
    x = sol.primal
    bits = np.round(x[gm.bits]).astype(int)
    capacity = float(np.dot(bits, inst.bit_values))
    profits = x[gm.psi].copy()
    probs = inst.scenario_set.probabilities
    risk = cvar(profits, probs, tech.cvar_confidence)
    embedded, products = [], []
    ids = (inst.unit.id,) + tuple(r.id for r in inst.rivals)
    costs = np.array([tech.variable_cost] + [r.variable_cost for r in inst.rivals])
    for sc, bl in zip(inst.scenario_set.scenarios, gm.blocks):
        limit = np.vstack([capacity * bl["A"][None, :], bl["rl"]])
        embedded.append(DispatchOutcome(
            scenario_id=sc.id, unit_ids=ids, unit_costs=costs, gen_limit=limit,
            shed_mode=ShedCostMode(inst.shed_cost_mode), shed_costs=bl["bc"], shed_limit=bl["bl"],
            demand=sc.demand, hours=sc.hours, price=x[bl["lam"]],
            dispatch=np.vstack([x[bl["pg"]][None, :], x[bl["pr"]]]),
            shed_blocks=x[bl["sh"]], mu_gen_lo=np.vstack([x[bl["mlo"]][None, :], x[bl["rlo"]]]),
            mu_gen_hi=np.vstack([x[bl["mhi"]][None, :], x[bl["rhi"]]]),
            mu_shed_lo=x[bl["slo"]], mu_shed_hi=x[bl["shi"]], price_cap=inst.price_cap))
        products.append(x[bl["w"]])
    milp_cvar = float(np.dot(x[gm.cvar_cols], gm.cvar_vals))
    return GmpSolution(
        unit_id=inst.unit.id, capacity=capacity, bits=bits, profits=profits, risk=risk,
        utility=_utility(tech.risk_weight, risk),
        financing=financing_check(risk.mean_profit, risk.cvar, tech, capacity),
        embedded=embedded, products=products, objective_value=sol.objective_value, gap=sol.gap,
        status=sol.status.value, milp_cvar=milp_cvar)


def solve_gmp(instance: GmpInstance, gap: float = 1e-3, time_limit: float | None = None,
              backend: str | None = None) -> GmpSolution:
    """Utility-maximising capacity for the acting generator, rivals held fixed."""
    gm = build_gmp(instance)
    sol = gm.model.solve(gap=gap, time_limit=time_limit, backend=backend)
    if not sol.status.ok:
        raise GmpSolveError(f"GMP for {instance.unit.id} ended with status {sol.status.value}: {sol.message}")
    return solution_from(gm, sol)


@dataclass(frozen=True)
class CapacityEvaluation:
    capacity: float
    profits: np.ndarray
    risk: RiskAssessment
    utility: float
    financing: FinancingCheck
    outcomes: list

    @property
    def feasible(self) -> bool:
        return self.financing.passed


def evaluate_capacity(instance: GmpInstance, capacity: float, backend: str | None = None) -> CapacityEvaluation:
    """Utility of a given capacity, clearing each scenario with the standalone dispatch LP."""
    tech = instance.tech
    fleet = instance.fleet(capacity)
    outcomes = [clear_scenario(fleet, sc, instance.strips, instance.price_cap, instance.shed_cost_mode, backend)
                for sc in instance.scenario_set.scenarios]
    profits = np.array([float(np.sum((o.price - tech.variable_cost) * o.dispatch[0] * o.hours))
                        - tech.fixed_cost * capacity for o in outcomes])
    risk = cvar(profits, instance.scenario_set.probabilities, tech.cvar_confidence)
    return CapacityEvaluation(capacity, profits, risk, _utility(tech.risk_weight, risk),
                              financing_check(risk.mean_profit, risk.cvar, tech, capacity), outcomes)


@dataclass(frozen=True)
class GmpAudit:
    profit_divergence: float  # max relative |MILP profit - re-cleared profit|
    recomputed_profits: np.ndarray
    settled_profits: np.ndarray
    lower_level_divergence: float  # max relative gap between embedded and standalone dispatch cost
    margin_residual: float
    mccormick_violation: float
    capacity_consistent: bool
    financing: FinancingCheck
    tolerance: float

    @property
    def ok(self) -> bool:
        return (self.profit_divergence <= self.tolerance and self.lower_level_divergence <= self.tolerance
                and self.mccormick_violation <= 1e-6 * max(1.0, self._scale) and self.capacity_consistent
                and self.financing.passed)

    _scale: float = 1.0


def audit_solution(instance: GmpInstance, solution: GmpSolution, tolerance: float = 1e-3,
                   backend: str | None = None) -> GmpAudit:
    """Re-clear dispatch at the returned capacity and cross-check the MILP incumbent."""
    tech = instance.tech
    ev = evaluate_capacity(instance, solution.capacity, backend)
    settled = np.array([float(np.sum((o.settled_price - tech.variable_cost) * o.dispatch[0] * o.hours))
                        - tech.fixed_cost * solution.capacity for o in ev.outcomes])
    scale = max(1.0, float(np.max(np.abs(ev.profits))), tech.fixed_cost * solution.capacity)
    div = float(np.max(np.abs(solution.profits - ev.profits))) / scale
    ll = []
    for emb, o in zip(solution.embedded, ev.outcomes):
        emb_cost = float(np.sum(emb.unit_costs[:, None] * emb.dispatch) + np.sum(emb.shed_costs[:, None] * emb.shed_blocks))
        ll.append(abs(emb_cost - o.primal_objective) / max(1.0, abs(o.primal_objective)))
    lem = 0.0
    mcc = 0.0
    for emb, w in zip(solution.embedded, solution.products):
        p = emb.dispatch[0]
        lem = max(lem, float(np.max(np.abs(emb.price * p - emb.unit_costs[0] * p
                                           - emb.gen_limit[0] * emb.mu_gen_hi[0]), initial=0.0)))
        prod = solution.bits[:, None] * emb.mu_gen_hi[0][None, :]
        mcc = max(mcc, float(np.max(np.abs(w - prod), initial=0.0)))
    cap_ok = abs(float(np.dot(solution.bits, instance.bit_values)) - solution.capacity) < 1e-9
    a = GmpAudit(div, ev.profits, settled, max(ll, default=0.0), lem, mcc, cap_ok,
                 financing_check(solution.risk.mean_profit, solution.risk.cvar, tech, solution.capacity),
                 tolerance)
    object.__setattr__(a, "_scale", instance.dual_ceiling())
    return a
