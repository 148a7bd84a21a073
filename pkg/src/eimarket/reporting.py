"""End-to-end runs, sweeps and the report artifacts they leave behind.

A run directory holds everything needed to rebuild its report:

    case.json        units, strips, contracts and settings of the final state
    dispatch.csv     one row per scenario interval: price, demand, shed, unit output
    state.json       the orchestrator's final state (iteration trace included)
    trace.jsonl      one line per agent solve, with wall times
    report.json      the RunReport, rebuilt from the three files above
    capacities.csv, price_duration.csv, curtailment.csv, net_demand.csv
                     plot-ready tables
    timings.json     wall-clock times (kept out of report.json so reports are reproducible)

Money in reports is rounded to cents and physical quantities to 1e-6 with
decimal half-even rounding, so the JSON text does not depend on the last
bits of floating-point noise.
"""
from __future__ import annotations

import csv
import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_problem, load_config
from .dispatch import DispatchError
from .equilibrium import CONVERGED, EquilibriumState, run
from .gmp import GmpBuildError, GmpSolveError
from .ins import InsBuildError, InsSolveError
from .model import ModelValidationError, UnitKind
from .risk import cvar
from .scenarios import ScenarioSet
from .solver import ModelError, SolverConfigError

REPORT_VERSION = 1
P95_CONVENTION = ("95% probability-of-exceedance: the 0.95 quantile of the scenario-level annual values, "
                  "linear interpolation between sorted scenarios at cumulative-probability positions "
                  "S_i / S_n-1 (identical to numpy's 'linear' method for equal probabilities)")
EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 1, 2, 3


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")

    @property
    def exit_code(self) -> int:
        if isinstance(self.cause, (ConfigError, ModelValidationError, GmpBuildError, InsBuildError, ModelError,
                                   SolverConfigError, ValueError)):
            return EXIT_VALIDATION
        return EXIT_SOLVER


def _round(x: float, places: str) -> float:
    return float(Decimal(repr(float(x))).quantize(Decimal(places), rounding=ROUND_HALF_EVEN)) + 0.0


def money(x: float) -> float:
    return _round(x, "0.01")


def qty(x: float) -> float:
    return _round(x, "0.000001")


def p95(values, probs) -> float:
    """0.95 quantile with linear interpolation at positions S_i / S_{n-1} of the sorted values."""
    x = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if x.size == 1:
        return float(x[0])
    order = np.argsort(x, kind="stable")
    x, p = x[order], p[order] / p.sum()
    before = np.concatenate([[0.0], np.cumsum(p)[:-1]])
    pos = before / before[-1]
    return float(np.interp(0.95, pos, x))


@dataclass(frozen=True)
class RunReport:
    name: str
    design: str
    status: str
    seed: int
    capacity: dict  # MW by kind plus totals
    units: dict  # unit id -> MW
    lost_load: dict  # strip id -> {"mean_pct", "p95_pct", "scenarios_pct"}
    value_of_lost_load: dict  # {"mean", "p95", "scenarios"} $
    iolr: dict  # {"contracts", "mean_profit", "cvar", "scenarios", "premium_income", ...}
    consumer_costs: dict  # {"energy", "insurance", "total"} expected $
    price_duration: list  # one record per scenario
    equilibrium: dict  # iterations, solves, oscillation
    solver: dict
    p95_convention: str = P95_CONVENTION
    version: int = REPORT_VERSION

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> "RunReport":
        return cls(**doc)

    @property
    def total_capacity(self) -> float:
        return self.capacity["total_dispatchable"]

    @property
    def hours_at_cap(self) -> float:
        """Probability-weighted annual hours with the settled price at the cap."""
        return sum(r["probability"] * r["hours_at_cap"] for r in self.price_duration)


# ----------------------------------------------------------------------------- artifacts

def write_artifacts(out: Path, problem, state: EquilibriumState, cfg: RunConfig, outcomes, allocs) -> None:
    """Write case.json and dispatch.csv for the final state."""
    contracted = state.contracted_fleet(problem)
    fleet = problem.fleet(state.capacities, contracted)
    ss = problem.scenario_set
    case = {
        "name": cfg.name, "design": problem.design.value, "status": state.status, "seed": problem.market.seed,
        "price_cap": problem.market.price_cap, "shed_cost_mode": problem.market.shed_cost_mode.value,
        "allocation": problem.allocation_mode(),
        "strips": [{"id": s.id, "compensation_value": s.compensation_value, "premium_rate": s.premium_rate,
                    "peak_demand": s.peak_demand} for s in problem.strips],
        "contracts": {s.id: int(state.contracts.get(s.id, 0)) for s in problem.strips},
        "units": [{"id": u.id, "kind": u.kind.value, "tech": u.tech.name, "capacity": u.capacity,
                   "variable_cost": u.tech.variable_cost,
                   "availability_price": u.tech.availability_price if u.kind == UnitKind.IOLR_CONTRACTED else 0.0}
                  for u in fleet],
        "scenarios": [{"id": sc.id, "probability": sc.probability} for sc in ss.scenarios],
        "iolr": {"cvar_confidence": problem.iolr.cvar_confidence, "technical_reserves": problem.iolr.technical_reserves},
        "price_bands": cfg.price_bands,
        "equilibrium": {"outer_iterations": state.outer_iterations, "solves": len(state.solves),
                        "reused_solves": sum(1 for s in state.solves if s.get("reused")),
                        "max_gap": max((s["gap"] for s in state.solves), default=0.0),
                        "oscillation": state.oscillation, "start": state.start},
    }
    (out / "case.json").write_text(json.dumps(case, indent=1, sort_keys=True) + "\n")
    ids = [u.id for u in fleet]
    strips = [s.id for s in problem.strips]
    with open(out / "dispatch.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "day", "interval", "hours", "price", "vre_availability"]
                   + [f"demand_{s}" for s in strips] + [f"shed_{s}" for s in strips] + [f"gen_{i}" for i in ids])
        for sc, o, a in zip(ss.scenarios, outcomes, allocs):
            if list(o.unit_ids) != ids:
                raise ValueError("dispatch unit order does not match the fleet")
            day, slot = sc.day_index, sc.interval_index
            for t in range(o.num_intervals):
                w.writerow([sc.id, int(day[t]), int(slot[t]), repr(float(o.hours[t])), repr(float(o.price[t])),
                            repr(float(sc.vre_availability[t]))]
                           + [repr(float(v)) for v in o.demand[:, t]] + [repr(float(v)) for v in a.shed[:, t]]
                           + [repr(float(v)) for v in o.dispatch[:, t]])


def read_dispatch(path) -> dict:
    """dispatch.csv -> {scenario id: {column: array}} in file order."""
    out: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = out.setdefault(row["scenario"], {})
            for k, v in row.items():
                if k != "scenario":
                    rec.setdefault(k, []).append(float(v))
    return {sid: {k: np.asarray(v) for k, v in cols.items()} for sid, cols in out.items()}


def build_report(case: dict, dispatch: dict, state: dict) -> RunReport:
    """Compute every report number from case.json, dispatch.csv and state.json contents."""
    probs = np.array([s["probability"] for s in case["scenarios"]])
    sids = [s["id"] for s in case["scenarios"]]
    cap = case["price_cap"]
    strips = case["strips"]
    units = case["units"]
    kinds = {k.value: 0.0 for k in UnitKind}
    for u in units:
        kinds[u["kind"]] += u["capacity"]
    capacity = {k: qty(v) for k, v in kinds.items()}
    capacity["total_dispatchable"] = qty(kinds["independent"] + kinds["iolr_contracted"])

    lost, voll = {}, []
    for s in strips:
        pct = []
        for sid in sids:
            d = dispatch[sid]
            energy = float(np.sum(d[f"demand_{s['id']}"] * d["hours"]))
            shed = float(np.sum(d[f"shed_{s['id']}"] * d["hours"]))
            pct.append(100.0 * shed / energy if energy > 0 else 0.0)
        lost[s["id"]] = {"mean_pct": qty(probs @ pct), "p95_pct": qty(p95(pct, probs)),
                         "scenarios_pct": [qty(v) for v in pct]}
    for sid in sids:
        d = dispatch[sid]
        voll.append(sum(s["compensation_value"] * float(np.sum(d[f"shed_{s['id']}"] * d["hours"])) for s in strips))
    q = case["contracts"]
    premium = sum(q[s["id"]] * s["premium_rate"] * s["peak_demand"] for s in strips)
    availability = sum(u["availability_price"] * u["capacity"] for u in units)
    psi = []
    for sid in sids:
        d = dispatch[sid]
        payout = sum(q[s["id"]] * s["compensation_value"] * float(np.sum(d[f"shed_{s['id']}"] * d["hours"]))
                     for s in strips)
        psi.append(premium - payout - availability)
    risk = cvar(psi, probs, case["iolr"]["cvar_confidence"])

    energy_cost, durations = [], []
    bands = sorted(case["price_bands"])
    for sid, p in zip(sids, probs):
        d = dispatch[sid]
        settled = np.minimum(d["price"], cap)
        served = sum(d[f"gen_{u['id']}"] for u in units)
        energy_cost.append(float(np.sum(settled * served * d["hours"])))
        at_cap = settled >= cap - 1e-6 * cap
        rec = {"scenario": sid, "probability": float(p), "hours_at_cap": qty(np.sum(d["hours"][at_cap])),
               "average_price": money(np.sum(settled * d["hours"]) / np.sum(d["hours"])), "bands": []}
        edges = bands + [cap]
        for lo, hi in zip(edges[:-1], edges[1:]):
            m = (settled >= lo) & (settled < hi) & ~at_cap
            rec["bands"].append({"from": lo, "to": hi, "hours": qty(np.sum(d["hours"][m]))})
        durations.append(rec)
    insurance = premium
    energy = float(probs @ energy_cost)
    eq = case["equilibrium"]
    return RunReport(
        name=case["name"], design=case["design"], status=case["status"], seed=int(case["seed"]),
        capacity=capacity, units={u["id"]: qty(u["capacity"]) for u in units},
        lost_load=lost,
        value_of_lost_load={"mean": money(probs @ voll), "p95": money(p95(voll, probs)),
                            "scenarios": [money(v) for v in voll]},
        iolr={"contracts": dict(q), "premium_income": money(premium), "availability_payments": money(availability),
              "mean_profit": money(risk.mean_profit), "cvar": money(risk.cvar),
              "scenarios": [money(v) for v in psi]},
        consumer_costs={"energy": money(energy), "insurance": money(insurance), "total": money(energy + insurance),
                        "energy_scenarios": [money(v) for v in energy_cost]},
        price_duration=durations,
        equilibrium={"outer_iterations": eq["outer_iterations"], "oscillation": eq["oscillation"],
                     "start": eq["start"], "sweeps": len(state.get("sweeps", []))},
        solver={"solves": eq["solves"], "reused_solves": eq["reused_solves"], "max_gap": qty(eq["max_gap"])},
    )


def regenerate(out) -> RunReport:
    """Rebuild report.json of a run directory from its raw artifacts."""
    out = Path(out)
    missing = [f for f in ("case.json", "dispatch.csv", "state.json") if not (out / f).exists()]
    if missing:
        raise FileNotFoundError(f"{out}: missing artifact(s) {missing}")
    case = json.loads((out / "case.json").read_text())
    state = json.loads((out / "state.json").read_text())
    rep = build_report(case, read_dispatch(out / "dispatch.csv"), state)
    (out / "report.json").write_text(rep.dumps())
    _write_tables(out, rep, case)
    return rep


def _write_tables(out: Path, rep: RunReport, case: dict) -> None:
    with open(out / "capacities.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "kind", "tech", "capacity_mw"])
        for u in case["units"]:
            w.writerow([u["id"], u["kind"], u["tech"], qty(u["capacity"])])
    emit_duration_data([rep], out / "price_duration.csv")
    dispatch = read_dispatch(out / "dispatch.csv")
    strips = [s["id"] for s in case["strips"]]
    vre = sum(u["capacity"] for u in case["units"] if u["kind"] == "fixed_vre")
    with open(out / "curtailment.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "day", "interval"] + [f"shed_{s}" for s in strips])
        for sid, d in dispatch.items():
            for t in range(len(d["hours"])):
                w.writerow([sid, int(d["day"][t]), int(d["interval"][t])] + [qty(d[f"shed_{s}"][t]) for s in strips])
    with open(out / "net_demand.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "day", "interval", "demand_mw", "vre_mw", "net_demand_mw"])
        for sid, d in dispatch.items():
            dem = sum(d[f"demand_{s}"] for s in strips)
            v = vre * d["vre_availability"]
            for t in range(len(dem)):
                w.writerow([sid, int(d["day"][t]), int(d["interval"][t]), qty(dem[t]), qty(v[t]), qty(dem[t] - v[t])])


def emit_duration_data(reports, path) -> Path:
    """Price-duration table: hours at cap, hours per price band and average price per scenario."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "design", "scenario", "probability", "band", "hours", "average_price"])
        for rep in reports:
            for r in rep.price_duration:
                for b in r["bands"]:
                    w.writerow([rep.name, rep.design, r["scenario"], r["probability"], f"{b['from']:g}-{b['to']:g}",
                                b["hours"], r["average_price"]])
                w.writerow([rep.name, rep.design, r["scenario"], r["probability"], "at_cap", r["hours_at_cap"],
                            r["average_price"]])
    return path


# ----------------------------------------------------------------------------- runs

@dataclass
class RunResult:
    report: RunReport | None
    out: Path
    exit_code: int
    error: str | None = None
    state: EquilibriumState | None = field(default=None, repr=False)


def _fail(out: Path, stage: str, exc: BaseException) -> StageError:
    err = exc if isinstance(exc, StageError) else StageError(stage, exc)
    (out / "error.json").write_text(json.dumps({"stage": err.stage, "error": type(err.cause).__name__,
                                                "message": str(err.cause),
                                                "traceback": traceback.format_exception(err.cause)}, indent=1))
    return err


def run_case(config, out, design: str | None = None, backend: str | None = None, problem=None) -> RunResult:
    """Ingest, cluster, equilibrate and report.  Never raises for stage failures; see ``exit_code``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage = "config"
    try:
        cfg = config if isinstance(config, RunConfig) else load_config(config)
        if design is not None:
            cfg = cfg.with_overrides(design=design)
        (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=1, sort_keys=True) + "\n")
        stage = "scenarios"
        if problem is None:
            problem = build_problem(cfg)
        problem.scenario_set.save(out / "scenario_set.json")
        stage = "equilibrium"
        backend = backend or cfg.backend
        t0 = time.perf_counter()
        with open(out / "trace.jsonl", "w") as log:
            state = run(problem, start=cfg.start, backend=backend, log=log)
        wall = time.perf_counter() - t0
        state.save(out / "state.json")
        stage = "dispatch"
        contracted = state.contracted_fleet(problem)
        outcomes = problem.clear(state.capacities, contracted, backend)
        allocs = [problem.allocate(o, w) for w, o in enumerate(outcomes)]
        stage = "report"
        write_artifacts(out, problem, state, cfg, outcomes, allocs)
        rep = regenerate(out)
        (out / "timings.json").write_text(json.dumps({"equilibrium_seconds": wall,
                                                      "solves": state.timings}, indent=1) + "\n")
    except Exception as exc:  # noqa: BLE001 - every stage failure maps to an exit code
        err = _fail(out, stage, exc)
        return RunResult(None, out, err.exit_code, str(err))
    code = EXIT_OK if state.status == CONVERGED else EXIT_NONCONVERGED
    return RunResult(rep, out, code, None, state)


def _sweep_point(args):
    cfg, axis, value, design, out, backend = args
    kw = {axis: value}
    try:
        point = cfg.with_overrides(design=design, **kw)
    except ConfigError as exc:
        return axis, value, design, None, EXIT_VALIDATION, str(exc)
    res = run_case(point, out, backend=backend)
    return axis, value, design, res.report, res.exit_code, res.error


def parse_axis(spec: str) -> tuple[str, list]:
    """``rps=0,0.2`` or ``competitors=3,6`` -> (axis, values)."""
    name, _, vals = spec.partition("=")
    name = name.strip()
    if name not in ("rps", "competitors") or not vals:
        raise ConfigError(f"axis must be rps=... or competitors=..., got {spec!r}")
    try:
        values = [int(v) if name == "competitors" else float(v) for v in vals.split(",")]
    except ValueError:
        raise ConfigError(f"bad axis values in {spec!r}") from None
    if name == "rps" and any(not 0 <= v <= 1 for v in values):
        raise ConfigError("rps values must lie in [0, 1]")
    if name == "competitors" and any(v < 1 for v in values):
        raise ConfigError("competitor counts must be >= 1")
    return name, values


def sweep(config, axis: str, values, out, designs=("EOM", "EIM"), jobs: int = 1, backend: str | None = None) -> list:
    """One run per (value, design); failures are recorded and the sweep carries on."""
    cfg = config if isinstance(config, RunConfig) else load_config(config)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, axis, v, d, out / f"{axis}_{v:g}_{d.lower()}", backend) for v in values for d in designs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    with open(out / "sweep_capacity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([axis, "design", "status", "exit_code", "independent_mw", "iolr_contracted_mw", "total_mw", "error"])
        for _, v, d, rep, code, err in rows:
            if rep is None:
                w.writerow([v, d, "failed", code, "", "", "", err])
            else:
                c = rep.capacity
                w.writerow([v, d, rep.status, code, c["independent"], c["iolr_contracted"], c["total_dispatchable"], ""])
    with open(out / "sweep_lost_load.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([axis, "design", "strip", "mean_pct", "p95_pct", "log10_mean_pct"])
        for _, v, d, rep, code, err in rows:
            if rep is None:
                continue
            for sid, ll in rep.lost_load.items():
                m = ll["mean_pct"]
                w.writerow([v, d, sid, m, ll["p95_pct"], qty(np.log10(m)) if m > 0 else ""])
    return rows


def load_scenario_set(out) -> ScenarioSet:
    return ScenarioSet.load(Path(out) / "scenario_set.json")
