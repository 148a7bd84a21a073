"""Insurer-of-last-resort contract and capacity decision.

The insurer chooses which strips to insure (``q_d`` binary, premium income
``C^P_d * peak_d``) and how much availability-contracted capacity to buy
(annual price ``C^F + zeta * C^I`` per MW).  Contracted capacity reduces the
ex-ante curtailment ``p_hat`` to an uncovered ex-post curtailment ``gamma``, on
which it pays ``C^sh_d`` per MWh for insured strips.  The product
``gamma * q`` is linearised with a McCormick envelope bounded by ``p_hat``.

Two ways of netting contracted MW against curtailment are provided:

* ``paper_literal_link``: ``gamma_d >= p_hat_d - sum_g P_g`` separately for
  every strip, so the same MW may relieve several strips at once;
* ``cascade_link``: contracted MW restores strips in descending compensation
  value and is used once, via cumulative ``max(0, P_j - R)`` terms with
  indicator binaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GeneratorTech, IolrConfig
from .risk import RiskAssessment, add_cvar_rows, cvar
from .solver import INF, Model

LINK_MODES = ("paper_literal_link", "cascade_link")


class InsBuildError(ValueError):
    pass


class InsSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class InsInput:
    shed: tuple  # per scenario (S, T) ex-ante curtailment MW
    hours: tuple  # per scenario (T,)
    probabilities: np.ndarray
    strip_ids: tuple
    compensation_values: np.ndarray  # (S,) $/MWh
    premium_rates: np.ndarray  # (S,) $/MW-peak-year
    strip_peaks: np.ndarray  # (S,) MW
    candidates: tuple  # GeneratorTech available for availability contracts
    iolr: IolrConfig
    integral_contracts: bool = True

    @classmethod
    def from_outcomes(cls, allocations, hours, probabilities, strips, candidates, iolr, integral_contracts=True):
        """Build from per-scenario strip curtailment arrays and the strip definitions."""
        return cls(tuple(np.asarray(a, float) for a in allocations), tuple(np.asarray(h, float) for h in hours),
                   np.asarray(probabilities, float), tuple(s.id for s in strips),
                   np.array([s.compensation_value for s in strips], float),
                   np.array([s.premium_rate for s in strips], float),
                   np.array([s.peak_demand for s in strips], float), tuple(candidates), iolr, integral_contracts)

    @property
    def num_strips(self) -> int:
        return len(self.strip_ids)

    def availability_prices(self) -> np.ndarray:
        return np.array([t.availability_price for t in self.candidates])

    @property
    def cheapest_availability_price(self) -> float:
        return float(np.min(self.availability_prices()))

    @property
    def max_total_shed(self) -> float:
        return float(max((float(np.max(s.sum(axis=0), initial=0.0)) for s in self.shed), default=0.0))

    def step_limits(self) -> np.ndarray:
        """Largest useful number of capacity steps per candidate."""
        return np.array([math.ceil(self.max_total_shed / t.capacity_step - 1e-9) for t in self.candidates])

    def capacity_grid(self) -> np.ndarray:
        steps = {t.capacity_step for t in self.candidates}
        if len(steps) != 1:
            raise ValueError("capacity grid needs a common step across candidates")
        step = steps.pop()
        return step * np.arange(int(self.step_limits().max(initial=0)) + 1)

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if self.iolr is not None:
            out += self.iolr.violations()
        for w, s in enumerate(self.shed):
            if s.shape[0] != self.num_strips:
                out.append((f"scenario {w}", "curtailment needs one row per strip"))
            if np.any(s < 0) or not np.all(np.isfinite(s)):
                out.append((f"scenario {w}", "curtailment must be finite and >= 0"))
        if any(t.availability_price < 0 for t in self.candidates):
            out.append(("candidates", "availability prices must be >= 0"))
        if not self.candidates:
            out.append(("candidates", "at least one contractable technology is required"))
        return out


def uncovered(shed, contracted_mw: float, comp, link: str) -> np.ndarray:
    """Ex-post curtailment per strip, given total contracted MW."""
    shed = np.asarray(shed, dtype=float)
    if link == "paper_literal_link":
        return np.maximum(shed - contracted_mw, 0.0)
    order = sorted(range(shed.shape[0]), key=lambda d: (-comp[d], d))
    cum = np.cumsum(shed[order], axis=0)
    big = np.maximum(cum - contracted_mw, 0.0)
    gam = np.diff(np.vstack([np.zeros((1, shed.shape[1])), big]), axis=0)
    out = np.empty_like(shed)
    out[order] = gam
    return out


@dataclass
class InsModel:
    model: Model
    input: InsInput
    link: str
    eom: bool
    q: np.ndarray
    steps: np.ndarray
    psi: np.ndarray
    cvar_cols: np.ndarray
    cvar_vals: np.ndarray
    products: list  # per scenario: (d, t, gamma col, y col)


def build_ins(inp: InsInput, link: str = "paper_literal_link", eom: bool = False) -> InsModel:
    if link not in LINK_MODES:
        raise InsBuildError(f"unknown link mode {link!r}; expected one of {LINK_MODES}")
    bad = inp.violations()
    if bad:
        raise InsBuildError("; ".join(f"{a}: {b}" for a, b in bad))
    S = inp.num_strips
    comp = inp.compensation_values
    m = Model("ins")
    q = m.add_vars([f"q[{sid}]" for sid in inp.strip_ids], lb=0.0, ub=1.0, kind="binary")
    nmax = inp.step_limits().astype(float)
    kind = "integer" if inp.integral_contracts else "continuous"
    steps = m.add_vars([f"n[{t.name}]" for t in inp.candidates], lb=0.0, ub=nmax, kind=kind)
    stepmw = np.array([t.capacity_step for t in inp.candidates])
    rmax = float(np.dot(nmax, stepmw))
    psi = m.add_vars([f"psi[{w}]" for w in range(len(inp.shed))], lb=-INF, ub=INF)
    premium = inp.premium_rates * inp.strip_peaks
    avail = inp.availability_prices() * stepmw
    products = []
    for w, (shed, hours) in enumerate(zip(inp.shed, inp.hours)):
        pcols = [psi[w]] + list(q) + list(steps)
        pvals = [1.0] + list(-premium) + list(avail)
        prods = []
        active = np.nonzero(shed.sum(axis=0) > 0)[0]
        for t in active:
            gam = {}
            if link == "paper_literal_link":
                for d in np.nonzero(shed[:, t] > 0)[0]:
                    g = m.add_var(f"gamma[{w},{d},{t}]", lb=0.0, ub=shed[d, t])
                    m.add_rows(np.array([[g, *steps]]), np.array([[1.0, *stepmw]]), ">=", shed[d, t],
                               [f"link[{w},{d},{t}]"])
                    gam[d] = g
            else:
                order = sorted(range(S), key=lambda d: (-comp[d], d))
                cum = np.cumsum(shed[order, t])
                prev = None
                for j, d in enumerate(order):
                    P = float(cum[j])
                    G = m.add_var(f"cumgap[{w},{j},{t}]", lb=0.0, ub=P)
                    z = m.add_var(f"short[{w},{j},{t}]", lb=0.0, ub=1.0, kind="binary")
                    m.add_rows(np.array([[G, *steps]]), np.array([[1.0, *stepmw]]), ">=", P, [f"cg_lo[{w},{j},{t}]"])
                    m1 = max(0.0, rmax - P)
                    m.add_rows(np.array([[G, *steps, z]]), np.array([[1.0, *stepmw, m1]]), "<=", P + m1,
                               [f"cg_hi[{w},{j},{t}]"])
                    m.add_rows(np.array([[G, z]]), np.array([[1.0, -P]]), "<=", 0.0, [f"cg_on[{w},{j},{t}]"])
                    if shed[d, t] > 0:
                        g = m.add_var(f"gamma[{w},{d},{t}]", lb=0.0, ub=shed[d, t])
                        cols = [g, G] + ([prev] if prev is not None else [])
                        vals = [1.0, -1.0] + ([1.0] if prev is not None else [])
                        m.add_rows(np.array([cols]), np.array([vals]), "==", 0.0, [f"gamma_def[{w},{d},{t}]"])
                        gam[d] = g
                    prev = G
            for d, g in gam.items():
                ub = shed[d, t]
                y = m.add_var(f"y[{w},{d},{t}]", lb=0.0, ub=ub)
                nm = f"[{w},{d},{t}]"
                m.add_rows(np.array([[y, q[d]]]), np.array([[1.0, -ub]]), "<=", 0.0, ["env_a" + nm])
                m.add_rows(np.array([[y, g]]), np.array([[1.0, -1.0]]), "<=", 0.0, ["env_b" + nm])
                m.add_rows(np.array([[y, g, q[d]]]), np.array([[1.0, -1.0, -ub]]), ">=", -ub, ["env_c" + nm])
                m.add_rows(np.array([[y]]), np.array([[1.0]]), ">=", 0.0, ["env_d" + nm])
                pcols.append(y)
                pvals.append(hours[t] * comp[d])
                prods.append((int(d), int(t), int(g), int(y)))
        m.add_rows(np.array([pcols]), np.array([pvals]), "==", 0.0, [f"profit[{w}]"])
        products.append(prods)
    probs = inp.probabilities
    z, rho, ccols, cvals = add_cvar_rows(m, psi, probs, inp.iolr.cvar_confidence, "cvar")
    m.add_rows(psi[None, :], probs[None, :], ">=", 0.0, ["expected_profit"])
    m.add_rows(ccols[None, :], cvals[None, :], ">=", -inp.iolr.technical_reserves, ["prudential"])
    if eom:
        for d in range(S):
            m.add_constr({int(q[d]): 1.0}, "==", 0.0, f"eom_no_contract[{d}]")
    beta = inp.iolr.risk_weight
    m.set_objective(sense="max", cols=np.concatenate([psi, ccols]),
                    vals=np.concatenate([(1.0 - beta) * probs, beta * cvals]))
    return InsModel(m, inp, link, eom, q, steps, psi, ccols, cvals, products)


@dataclass
class IolrDecision:
    contracts: np.ndarray  # (S,) 0/1
    contracted: dict  # tech name -> MW
    gamma: list  # per scenario (S, T) uncovered curtailment
    profits: np.ndarray
    risk: RiskAssessment
    utility: float
    link: str
    eom: bool
    milp_profits: np.ndarray
    milp_products: list  # per scenario list of (d, t, gamma, y) at the incumbent
    milp_contracts: np.ndarray
    milp_contracted_mw: np.ndarray
    status: str
    gap: float

    @property
    def total_contracted(self) -> float:
        return float(sum(self.contracted.values()))

    @property
    def mean_profit(self) -> float:
        return self.risk.mean_profit

    def to_json(self, strip_ids=()) -> dict:
        ids = list(strip_ids) or [str(i) for i in range(len(self.contracts))]
        return {"contracts": {i: int(c) for i, c in zip(ids, self.contracts)},
                "contracted_mw": {k: float(v) for k, v in self.contracted.items()},
                "profits": [float(x) for x in self.profits], "mean_profit": self.risk.mean_profit,
                "cvar": self.risk.cvar, "var": self.risk.var, "utility": self.utility, "link": self.link,
                "eom": self.eom, "status": self.status}


def evaluate_decision(inp: InsInput, q, contracted_mw, link: str) -> tuple[np.ndarray, list]:
    """Per-scenario profit and uncovered curtailment for a candidate decision."""
    q = np.asarray(q, dtype=float)
    mw = np.asarray(contracted_mw, dtype=float)
    total = float(mw.sum())
    fixed = float(np.sum(q * inp.premium_rates * inp.strip_peaks)) - float(np.dot(inp.availability_prices(), mw))
    psi, gams = [], []
    for shed, hours in zip(inp.shed, inp.hours):
        g = uncovered(shed, total, inp.compensation_values, link)
        gams.append(g)
        psi.append(fixed - float(np.sum((q * inp.compensation_values)[:, None] * g * hours[None, :])))
    return np.array(psi), gams


def _assess(inp, psi):
    risk = cvar(psi, inp.probabilities, inp.iolr.cvar_confidence)
    beta = inp.iolr.risk_weight
    return risk, (1.0 - beta) * risk.mean_profit + beta * risk.cvar


def _feasible(inp, risk, tol=1e-7) -> bool:
    scale = max(1.0, inp.iolr.technical_reserves)
    return risk.mean_profit >= -tol * scale and risk.cvar + inp.iolr.technical_reserves >= -tol * scale


def solve_ins(inp: InsInput, link: str = "paper_literal_link", eom: bool = False, gap: float = 1e-4,
              time_limit: float | None = None, backend: str | None = None) -> IolrDecision:
    """Utility-maximising insurance decision.

    After the MILP, any insured strip whose removal leaves utility unchanged
    (within round-off) is dropped, so indifference resolves to no contract.
    """
    im = build_ins(inp, link, eom)
    sol = im.model.solve(gap=gap, time_limit=time_limit, backend=backend)
    if not sol.status.ok:
        raise InsSolveError(f"IOLR problem ended with status {sol.status.value}: {sol.message}")
    x = sol.primal
    q = np.round(x[im.q]).astype(int)
    n = x[im.steps]
    if inp.integral_contracts:
        n = np.round(n)
    mw = n * np.array([t.capacity_step for t in inp.candidates]) + 0.0
    milp_q, milp_mw = q.copy(), mw.copy()
    psi, gams = evaluate_decision(inp, q, mw, link)
    risk, util = _assess(inp, psi)
    for d in range(inp.num_strips):
        if not q[d]:
            continue
        trial = q.copy()
        trial[d] = 0
        p2, g2 = evaluate_decision(inp, trial, mw, link)
        r2, u2 = _assess(inp, p2)
        if u2 >= util - 1e-9 * max(1.0, abs(util)) and _feasible(inp, r2):
            q, psi, gams, risk, util = trial, p2, g2, r2, u2
    if not q.any() and mw.sum() > 0:
        p2, g2 = evaluate_decision(inp, q, np.zeros_like(mw), link)
        r2, u2 = _assess(inp, p2)
        if u2 >= util - 1e-9 * max(1.0, abs(util)):
            mw, psi, gams, risk, util = np.zeros_like(mw), p2, g2, r2, u2
    prods = [[(d, t, float(x[g]), float(x[y])) for d, t, g, y in pr] for pr in im.products]
    return IolrDecision(q, {t.name: float(v) for t, v in zip(inp.candidates, mw)}, gams, psi, risk, util, link, eom,
                        x[im.psi].copy(), prods, milp_q, milp_mw, sol.status.value, sol.gap)


@dataclass(frozen=True)
class InsAudit:
    profit_mismatch: float  # max |recomputed - MILP| / scale
    recomputed_profits: np.ndarray
    premium_income: float
    payouts: np.ndarray
    availability_cost: float
    cvar_recomputed: float
    mccormick_violation: float
    prudential_slack: float
    expected_profit_slack: float

    @property
    def ok(self) -> bool:
        return (self.profit_mismatch <= 1e-6 and self.prudential_slack >= -1e-6 * max(1.0, abs(self.prudential_slack))
                and self.expected_profit_slack >= -1e-6 and self.mccormick_violation <= 1e-6)


def _term_by_term(inp: InsInput, q, mw, link):
    premium = float(np.sum(q * inp.premium_rates * inp.strip_peaks))
    avail = float(np.dot(inp.availability_prices(), mw))
    payouts = []
    for shed, hours in zip(inp.shed, inp.hours):
        gam = uncovered(shed, float(np.sum(mw)), inp.compensation_values, link)
        total = 0.0
        for d in range(inp.num_strips):
            if q[d]:
                total += inp.compensation_values[d] * float(np.dot(gam[d], hours))
        payouts.append(total)
    payouts = np.array(payouts)
    return premium, payouts, avail, premium - payouts - avail


def audit_ins(decision: IolrDecision, inp: InsInput) -> InsAudit:
    """Recompute every profit term from first principles and check the envelope at the incumbent.

    The MILP profits are compared against a recomputation at the MILP's own
    contracts; slacks and CVaR refer to the final (tie-broken) decision.
    """
    _, _, _, psi_milp = _term_by_term(inp, decision.milp_contracts, decision.milp_contracted_mw, decision.link)
    scale = max(1.0, float(np.max(np.abs(psi_milp), initial=0.0)), float(np.max(np.abs(decision.milp_profits))))
    mismatch = float(np.max(np.abs(psi_milp - decision.milp_profits))) / scale
    q = decision.contracts
    mw = np.array([decision.contracted[t.name] for t in inp.candidates])
    premium, payouts, avail, psi = _term_by_term(inp, q, mw, decision.link)
    mismatch = max(mismatch, float(np.max(np.abs(psi - decision.profits))) / scale)
    mcc = 0.0
    for prods in decision.milp_products:
        for d, _t, g, y in prods:
            mcc = max(mcc, abs(y - g * decision.milp_contracts[d]))
    risk = cvar(psi, inp.probabilities, inp.iolr.cvar_confidence)
    return InsAudit(mismatch, psi, premium, payouts, avail, risk.cvar, mcc,
                    risk.cvar + inp.iolr.technical_reserves, risk.mean_profit)
