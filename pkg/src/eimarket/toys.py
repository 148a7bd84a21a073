"""Seeded small instances for tests, audits and scripts."""
from __future__ import annotations

import numpy as np

from .gmp import GmpInstance
from .model import DemandStrip, GeneratorTech, GeneratorUnit, ShedCostMode, UnitKind
from .scenarios import RepDay, Scenario, ScenarioSet


def toy_tech(name="gas", variable_cost=40.0, fixed_cost=20_000.0, investment_cost=600_000.0, step=25.0, bits=4,
             **kw) -> GeneratorTech:
    base = dict(asset_life=20, equity_rate=0.12, debt_rate=0.06, gearing=0.6)
    base.update(kw)
    return GeneratorTech(name, variable_cost, fixed_cost, investment_cost, capacity_step=step,
                         expansion_bits=bits, **base)


def toy_strips(comp=(15_000.0, 7_500.0), premium=(0.0, 0.0), peaks=(0.0, 0.0)) -> tuple:
    ids = ("essential", "non_essential")
    return tuple(DemandStrip(i, c, p, 0.5, pk) for i, c, p, pk in zip(ids, comp, premium, peaks))


def toy_scenario_set(demand, vre=None, weight=365.0, interval_hours=1.0, probs=None) -> ScenarioSet:
    """``demand`` is (scenarios, strips, T) MW; one representative day per scenario."""
    demand = np.asarray(demand, dtype=float)
    n, _, T = demand.shape
    probs = np.full(n, 1.0 / n) if probs is None else np.asarray(probs, float)
    vre = np.zeros((n, T)) if vre is None else np.asarray(vre, float)
    scs = tuple(Scenario(f"s{w}", float(probs[w]), (RepDay(demand[w], vre[w], weight),), interval_hours)
                for w in range(n))
    peaks = demand.max(axis=(0, 2))
    return ScenarioSet(scs, 0.0, tuple(f"d{i}" for i in range(demand.shape[1])), tuple(float(p) for p in peaks))


def random_gmp_instance(seed: int, scenarios: int = 2, intervals: int = 24, bits: int = 4,
                        mode: ShedCostMode = ShedCostMode.CAPPED_SETTLEMENT) -> GmpInstance:
    """Acting gas unit against one to three fixed rivals; scarcity in some intervals."""
    rng = np.random.default_rng(seed)
    rivals_n = int(rng.integers(1, 4))
    rival_cost = rng.uniform(20.0, 90.0, rivals_n)
    rival_cap = 25.0 * rng.integers(2, 8, rivals_n)
    base = rng.uniform(0.55, 1.0) * rival_cap.sum()
    shape = 0.5 + 0.5 * np.sin(np.linspace(0, 2 * np.pi, intervals, endpoint=False) - rng.uniform(0, np.pi))
    tot = np.array([base * (0.7 + 0.6 * shape) * rng.uniform(0.9, 1.2, intervals) for _ in range(scenarios)])
    demand = np.stack([tot * 0.5, tot * 0.5], axis=1)
    tech = toy_tech(variable_cost=float(rng.uniform(30.0, 80.0)), fixed_cost=float(rng.uniform(1e4, 4e4)),
                    investment_cost=float(rng.uniform(3e5, 9e5)), bits=bits,
                    risk_weight=float(rng.choice([0.0, 0.5, 0.8])))
    rivals = tuple(GeneratorUnit(f"r{i}", toy_tech(f"rt{i}", variable_cost=float(rival_cost[i])), capacity=float(rival_cap[i]))
                   for i in range(rivals_n))
    ss = toy_scenario_set(demand, weight=float(rng.uniform(50, 365)))
    return GmpInstance(GeneratorUnit("g", tech), rivals, ss, toy_strips(), 2000.0, mode)


def random_ins_input(seed: int, scenarios: int = 4, intervals: int = 24, reserves: float | None = None,
                     premium_scale: float | None = None, integral: bool = True):
    """Sparse random curtailment with premiums around the expected payout."""
    from .ins import InsInput
    from .model import IolrConfig
    rng = np.random.default_rng(seed)
    shed = []
    for _ in range(scenarios):
        s = np.zeros((2, intervals))
        hit = rng.random(intervals) < rng.uniform(0.05, 0.3)
        tot = np.where(hit, rng.uniform(5, 120, intervals), 0.0)
        s[1] = np.minimum(tot, 60.0)
        s[0] = tot - s[1]
        shed.append(s)
    hours = tuple(np.full(intervals, float(rng.uniform(5, 30))) for _ in range(scenarios))
    comp = np.array([15_000.0, 7_500.0])
    peaks = np.array([400.0, 400.0])
    probs = np.full(scenarios, 1.0 / scenarios)
    payout = np.array([probs @ [float(np.dot(s[d], h)) for s, h in zip(shed, hours)] for d in range(2)]) * comp / peaks
    scale = float(rng.uniform(0.6, 1.6)) if premium_scale is None else premium_scale
    tech = toy_tech(step=25.0, fixed_cost=float(rng.uniform(1e4, 3e4)), investment_cost=float(rng.uniform(3e5, 8e5)))
    phi = float(rng.uniform(0, 3e7)) if reserves is None else reserves
    iolr = IolrConfig(phi, float(rng.choice([0.75, 0.9, 0.995])), float(rng.choice([0.0, 0.5, 1.0])))
    return InsInput(tuple(shed), hours, probs, ("essential", "non_essential"), comp, payout * scale, peaks,
                    (tech,), iolr, integral)


def toy_market(seed: int = 0, generators: int = 2, scenarios: int = 2, intervals: int = 24, bits: int = 4,
               design: str = "EIM", premium=(90_000.0, 45_000.0), reserves: float = 5e7, vre_mw: float = 100.0,
               level: float = 300.0, weight: float = 365.0, **market_kw):
    """A small two-strip market with identical gas entrants and a fixed VRE plant."""
    from .equilibrium import MarketProblem
    from .model import Design, IolrConfig, MarketConfig
    rng = np.random.default_rng(seed)
    t = np.arange(intervals)
    shape = 0.75 + 0.25 * np.sin(2 * np.pi * (t - intervals / 4) / intervals)
    tot = np.array([level * shape * rng.uniform(0.9, 1.15, intervals) * rng.uniform(0.95, 1.1)
                    for _ in range(scenarios)])
    vre = np.clip(np.array([0.5 + 0.4 * np.sin(2 * np.pi * (t - intervals / 4) / intervals) + rng.normal(0, 0.15, intervals)
                            for _ in range(scenarios)]), 0.0, 1.0)
    demand = np.stack([tot * 0.5, tot * 0.5], axis=1)
    ss = toy_scenario_set(demand, vre, weight=weight)
    strips = toy_strips(premium=premium, peaks=tuple(demand.max(axis=(0, 2))))
    tech = toy_tech(variable_cost=60.0, fixed_cost=20_000.0, investment_cost=500_000.0, bits=bits)
    gens = tuple(GeneratorUnit(f"g{i + 1}", tech) for i in range(generators))
    vre_tech = GeneratorTech("vre", 0.0, 0.0, 0.0, 25, 0.0, 0.0, 0.0)
    vre_units = (GeneratorUnit("vre", vre_tech, UnitKind.FIXED_VRE, vre_mw, "vre"),) if vre_mw > 0 else ()
    market = MarketConfig(design=Design(design), **market_kw)
    return MarketProblem(ss, strips, gens, vre_units, (tech,), market, IolrConfig(reserves, 0.95, 0.5))
