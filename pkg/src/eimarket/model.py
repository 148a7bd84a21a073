"""Domain types shared by every stage of the market model.

All money is $ (annual amounts are $/year), power is MW, energy MWh.
Objects are frozen dataclasses; invariants are collected by
:func:`validate_model` instead of raising at construction, so that a broken
input can be reported in full before anything reaches a solver.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


def annuity_factor(rate: float, life: float) -> float:
    """Capital recovery factor: annual payment per $ of up-front cost."""
    if not (math.isfinite(rate) and math.isfinite(life)):
        raise ValueError("annuity_factor needs finite rate and life")
    if rate < 0 or life < 1:
        raise ValueError("annuity_factor needs rate >= 0 and life >= 1")
    if rate == 0:
        return 1.0 / life
    return rate / (1.0 - (1.0 + rate) ** (-life))


class UnitKind(str, enum.Enum):
    INDEPENDENT = "independent"
    IOLR_CONTRACTED = "iolr_contracted"
    FIXED_VRE = "fixed_vre"


class Design(str, enum.Enum):
    EOM = "EOM"
    EIM = "EIM"


class ShedCostMode(str, enum.Enum):
    CAPPED_SETTLEMENT = "capped_settlement"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class GeneratorTech:
    name: str
    variable_cost: float  # $/MWh
    fixed_cost: float  # $/MW-year
    investment_cost: float  # $/MW
    asset_life: float  # years
    equity_rate: float
    debt_rate: float
    gearing: float
    risk_weight: float = 0.5
    cvar_confidence: float = 0.95
    capacity_step: float = 25.0
    expansion_bits: int = 5

    @property
    def wacc(self) -> float:
        return wacc(self)

    @property
    def annuity_factor(self) -> float:
        return annuity_factor(self.wacc, self.asset_life)

    @property
    def availability_price(self) -> float:
        """Annual IOLR availability payment per MW: fixed cost plus annuitised capital."""
        return self.fixed_cost + self.annuity_factor * self.investment_cost

    @property
    def max_capacity(self) -> float:
        return self.capacity_step * (2 ** self.expansion_bits - 1)

    def violations(self, where: str = "") -> list[tuple[str, str]]:
        loc = where or f"tech {self.name}"
        out = []
        if not 0 <= self.gearing <= 1:
            out.append((loc, "gearing must lie in [0, 1]"))
        if not 0 <= self.risk_weight <= 1:
            out.append((loc, "risk_weight must lie in [0, 1]"))
        if not 0 < self.cvar_confidence < 1:
            out.append((loc, "cvar_confidence must lie in (0, 1)"))
        if not self.capacity_step > 0:
            out.append((loc, "capacity_step must be positive"))
        if int(self.expansion_bits) != self.expansion_bits or self.expansion_bits < 1:
            out.append((loc, "expansion_bits must be an integer >= 1"))
        for nm in ("variable_cost", "fixed_cost", "investment_cost", "equity_rate", "debt_rate"):
            v = getattr(self, nm)
            if not (math.isfinite(v) and v >= 0):
                out.append((loc, f"{nm} must be finite and >= 0"))
        if not (math.isfinite(self.asset_life) and self.asset_life >= 1):
            out.append((loc, "asset_life must be >= 1 year"))
        return out


def wacc(tech: GeneratorTech) -> float:
    """Weighted average cost of capital, equity share ``1 - gearing``."""
    return tech.equity_rate * (1.0 - tech.gearing) + tech.gearing * tech.debt_rate


@dataclass(frozen=True)
class GeneratorUnit:
    """A capacity-holding participant in dispatch.

    ``availability`` is None for thermal plant (always 1), the string
    ``"vre"`` to follow the scenario's VRE availability trace, or a mapping
    scenario id -> per-interval array.
    """

    id: str
    tech: GeneratorTech
    kind: UnitKind = UnitKind.INDEPENDENT
    capacity: float = 0.0
    availability: object = None

    def availability_in(self, scenario) -> np.ndarray:
        n = scenario.num_intervals
        if self.availability is None:
            return np.ones(n)
        if isinstance(self.availability, str):
            if self.availability != "vre":
                raise ValueError(f"unknown availability source {self.availability!r}")
            return scenario.vre_availability
        return np.asarray(self.availability[scenario.id], dtype=float)

    def with_capacity(self, capacity: float) -> "GeneratorUnit":
        return GeneratorUnit(self.id, self.tech, self.kind, float(capacity), self.availability)

    @property
    def variable_cost(self) -> float:
        return self.tech.variable_cost

    def violations(self, scenarios=()) -> list[tuple[str, str]]:
        loc = f"unit {self.id}"
        out = []
        if not (math.isfinite(self.capacity) and self.capacity >= 0):
            out.append((loc, "capacity must be >= 0"))
        elif self.kind != UnitKind.FIXED_VRE:
            steps = self.capacity / self.tech.capacity_step
            if abs(steps - round(steps)) > 1e-9:
                out.append((loc, f"capacity {self.capacity} is not a multiple of step {self.tech.capacity_step}"))
        for sc in scenarios:
            try:
                a = self.availability_in(sc)
            except (KeyError, ValueError) as exc:
                out.append((loc, f"availability missing for scenario {sc.id}: {exc}"))
                continue
            bad = np.nonzero((a < 0) | (a > 1) | ~np.isfinite(a))[0]
            if bad.size:
                out.append((f"{loc}, t={int(bad[0])}, scenario={sc.id}", "availability must lie in [0, 1]"))
        return out


@dataclass(frozen=True)
class DemandStrip:
    """A priority class of load.

    ``share`` is the fraction of system demand assigned to the strip;
    ``peak_demand`` is filled in from raw traces when scenarios are built.
    """

    id: str
    compensation_value: float  # $/MWh paid on interruption
    premium_rate: float  # $/MW-peak-year
    share: float = 0.5
    peak_demand: float = 0.0

    def with_peak(self, peak: float) -> "DemandStrip":
        return DemandStrip(self.id, self.compensation_value, self.premium_rate, self.share, float(peak))

    def violations(self) -> list[tuple[str, str]]:
        loc = f"strip {self.id}"
        out = []
        if not self.compensation_value > 0:
            out.append((loc, "compensation_value must be > 0"))
        if not self.premium_rate >= 0:
            out.append((loc, "premium_rate must be >= 0"))
        if not 0 <= self.share <= 1:
            out.append((loc, "share must lie in [0, 1]"))
        return out


@dataclass(frozen=True)
class IolrConfig:
    technical_reserves: float = 250e6  # $
    cvar_confidence: float = 0.995
    risk_weight: float = 0.5

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if not self.technical_reserves >= 0:
            out.append(("iolr", "technical_reserves must be >= 0"))
        if not 0 < self.cvar_confidence < 1:
            out.append(("iolr", "cvar_confidence must lie in (0, 1)"))
        if not 0 <= self.risk_weight <= 1:
            out.append(("iolr", "risk_weight must lie in [0, 1]"))
        return out


@dataclass(frozen=True)
class MarketConfig:
    design: Design = Design.EIM
    price_cap: float = 2000.0
    rps: float = 0.4
    shed_cost_mode: ShedCostMode = ShedCostMode.CAPPED_SETTLEMENT
    eom_allocation: str = "pro_rata"
    optimality_gap: float = 1e-3
    eps_q: float = 0.5  # binary contract deltas
    eps_contract: float = 12.5  # MW
    eps_capacity: float = 12.5  # MW
    max_outer_iters: int = 10
    max_inner_iters: int = 25
    seed: int = 0
    intervals_per_day: int = 48
    time_limit: float | None = None

    @property
    def interval_hours(self) -> float:
        return 24.0 / self.intervals_per_day

    def violations(self, techs=()) -> list[tuple[str, str]]:
        out = []
        if techs and not self.price_cap > max(t.variable_cost for t in techs):
            out.append(("market", "price_cap must exceed every generator variable_cost"))
        if not 0 <= self.rps <= 1:
            out.append(("market", "rps must lie in [0, 1]"))
        if not self.optimality_gap > 0:
            out.append(("market", "optimality_gap must be > 0"))
        for nm in ("eps_q", "eps_contract", "eps_capacity"):
            if not getattr(self, nm) > 0:
                out.append(("market", f"{nm} must be > 0"))
        if self.eom_allocation not in ("pro_rata", "seeded_random"):
            out.append(("market", "eom_allocation must be 'pro_rata' or 'seeded_random'"))
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            out.append(("market", "iteration limits must be >= 1"))
        return out


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


class ModelValidationError(ValueError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("model validation failed:\n" + "\n".join(f"  - {v}" for v in report.violations))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise ModelValidationError(self)


def validate_model(scenarios=None, units=(), strips=(), market: MarketConfig | None = None,
                   iolr: IolrConfig | None = None, techs=()) -> ValidationReport:
    """Check every invariant of an assembled model; never raises, never mutates."""
    found: list[tuple[str, str]] = []
    techs = list(techs) or list({u.tech.name: u.tech for u in units}.values())
    for t in techs:
        found += t.violations()
    scen_list = list(scenarios.scenarios) if scenarios is not None else []
    for u in units:
        found += u.violations(scen_list)
    for s in strips:
        found += s.violations()
    if strips and abs(sum(s.share for s in strips) - 1.0) > 1e-9:
        found.append(("strips", "strip shares must sum to 1"))
    if market is not None:
        found += market.violations(techs)
    if iolr is not None:
        found += iolr.violations()
    if scenarios is not None:
        found += scenarios.violations(strips, market.intervals_per_day if market else None)
    return ValidationReport(tuple(Violation(loc, msg) for loc, msg in found))
