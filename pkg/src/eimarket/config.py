"""Run configuration: one YAML document checked against a versioned JSON schema.

Relative paths inside a config (traces, techs file) resolve against the
config file's directory.  :func:`build_problem` turns a config into the
scenario set and :class:`MarketProblem` the orchestrator consumes.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .model import (Design, DemandStrip, GeneratorTech, GeneratorUnit, IolrConfig, MarketConfig, ShedCostMode,
                    UnitKind, validate_model)
from .scenarios import build_scenario_set, load_traces

SCHEMA_VERSION = 1
VRE_TECH = GeneratorTech("vre", 0.0, 0.0, 0.0, 25, 0.0, 0.0, 0.0)
_MARKET_KEYS = ("price_cap", "rps", "optimality_gap", "eps_q", "eps_contract", "eps_capacity", "max_outer_iters",
                "max_inner_iters", "seed", "time_limit", "eom_allocation")


class ConfigError(ValueError):
    pass


def schema() -> dict:
    return json.loads(resources.files("eimarket").joinpath("run_config.schema.json").read_text())


@dataclass(frozen=True)
class RunConfig:
    doc: dict
    base_dir: Path

    @property
    def name(self) -> str:
        return self.doc.get("name", "run")

    @property
    def backend(self):
        return self.doc.get("solver", {}).get("backend")

    @property
    def start(self) -> str:
        return self.doc.get("equilibrium", {}).get("start", "zero")

    @property
    def price_bands(self) -> list:
        return list(self.doc.get("report", {}).get("price_bands", [0.0, 100.0, 300.0, 1000.0]))

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else (self.base_dir / path).resolve()

    def with_overrides(self, design: str | None = None, rps: float | None = None,
                       competitors: int | None = None) -> "RunConfig":
        doc = copy.deepcopy(self.doc)
        if design is not None:
            doc.setdefault("market", {})["design"] = str(design).upper()
        if rps is not None:
            doc.setdefault("market", {})["rps"] = float(rps)
        if competitors is not None:
            gens = doc.get("generators")
            techs = gens["techs"] if isinstance(gens, dict) else sorted({g["tech"] for g in gens or []})
            doc["generators"] = {"count": int(competitors), "techs": techs}
        check(doc)
        return RunConfig(doc, self.base_dir)

    def to_json(self) -> dict:
        return copy.deepcopy(self.doc)


def check(doc: dict) -> None:
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    check(doc)
    return RunConfig(doc, path.parent.resolve())


def load_techs(cfg: RunConfig) -> dict:
    """Tech table: the techs file (if any) with per-field overrides from the config."""
    table = {}
    if "techs_file" in cfg.doc:
        p = cfg.resolve(cfg.doc["techs_file"])
        try:
            raw = yaml.safe_load(p.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read techs file {p}: {exc}") from None
        if not isinstance(raw, dict) or not isinstance(raw.get("techs"), dict):
            raise ConfigError(f"{p}: expected a 'techs' mapping")
        table = {k: dict(v) for k, v in raw["techs"].items()}
    for name, over in cfg.doc.get("techs", {}).items():
        table.setdefault(name, {}).update(over)
    out = {}
    fields = ("variable_cost", "fixed_cost", "investment_cost", "asset_life", "equity_rate", "debt_rate", "gearing")
    for name, v in sorted(table.items()):
        missing = [f for f in fields if f not in v]
        if missing:
            raise ConfigError(f"tech {name}: missing {missing}")
        try:
            out[name] = GeneratorTech(name, **{k: (int(x) if k == "expansion_bits" else float(x)) for k, x in v.items()})
        except TypeError as exc:
            raise ConfigError(f"tech {name}: {exc}") from None
    return out


def generator_units(cfg: RunConfig, techs: dict) -> tuple:
    gens = cfg.doc.get("generators")
    if gens is None:
        gens = {"count": 3, "techs": sorted(techs)}
    if isinstance(gens, dict):
        names = gens["techs"]
        width = len(str(gens["count"]))
        gens = [{"id": f"gen_{i + 1:0{width}d}_{names[i % len(names)]}", "tech": names[i % len(names)]}
                for i in range(gens["count"])]
    out = []
    for g in gens:
        if g["tech"] not in techs:
            raise ConfigError(f"generator {g['id']}: unknown tech {g['tech']!r}")
        out.append(GeneratorUnit(g["id"], techs[g["tech"]]))
    if len({u.id for u in out}) != len(out):
        raise ConfigError("generator ids must be unique")
    return tuple(out)


def market_config(cfg: RunConfig) -> MarketConfig:
    m = cfg.doc.get("market", {})
    kw = {k: m[k] for k in _MARKET_KEYS if k in m}
    return MarketConfig(design=Design(m.get("design", "EIM")),
                        shed_cost_mode=ShedCostMode(m.get("shed_cost_mode", "capped_settlement")), **kw)


def build_problem(cfg: RunConfig):
    """Load traces, cluster them and assemble the market problem; raises ConfigError on invalid input."""
    from .equilibrium import MarketProblem
    techs = load_techs(cfg)
    units = generator_units(cfg, techs)
    market = market_config(cfg)
    i = cfg.doc.get("iolr", {})
    iolr = IolrConfig(**{k: i[k] for k in ("technical_reserves", "cvar_confidence", "risk_weight") if k in i})
    cand_names = i.get("candidates", sorted(techs))
    unknown = [c for c in cand_names if c not in techs]
    if unknown:
        raise ConfigError(f"iolr candidates name unknown tech(s) {unknown}")
    strips = tuple(DemandStrip(s["id"], float(s["compensation_value"]), float(s["premium_rate"]), float(s["share"]))
                   for s in cfg.doc["strips"])
    try:
        traces = load_traces([cfg.resolve(p) for p in cfg.doc["traces"]])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"traces: {exc}") from None
    try:
        ss = build_scenario_set(traces, strips, market.rps, int(cfg.doc.get("representative_days", 2)),
                                cfg.doc.get("representative_day", "centroid") == "medoid",
                                float(cfg.doc.get("energy_tolerance", 0.02)))
    except ValueError as exc:
        raise ConfigError(f"scenarios: {exc}") from None
    strips = tuple(s.with_peak(p) for s, p in zip(strips, ss.strip_peaks))
    vre = (GeneratorUnit("vre", VRE_TECH, UnitKind.FIXED_VRE, ss.vre_capacity, "vre"),) if ss.vre_capacity > 0 else ()
    report = validate_model(ss, units + vre, strips, market, iolr, techs=list(techs.values()))
    if not report.ok:
        raise ConfigError("model validation failed: " + "; ".join(str(v) for v in report.violations))
    problem = MarketProblem(ss, strips, units, vre, tuple(techs[c] for c in cand_names), market, iolr,
                            i.get("link", "paper_literal_link"), i.get("contract_update", "replace"),
                            bool(i.get("integral_contracts", True)))
    return problem

