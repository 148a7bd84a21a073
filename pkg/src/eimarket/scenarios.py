"""Demand/VRE traces -> weighted representative days.

Traces are half-hourly CSV series, one or more scenario-years.  Each scenario
is reduced independently with Ward agglomerative clustering on per-day
feature vectors (z-scored demand and availability), and each cluster becomes
one representative day weighted by the number of days it stands for.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from functools import cached_property
from pathlib import Path

import numpy as np

INTERVALS_PER_DAY = 48
INTERVAL = timedelta(minutes=30)


class TraceFormatError(ValueError):
    pass


class SizingError(ValueError):
    pass


@dataclass(frozen=True)
class RawTrace:
    scenario_id: str
    timestamps: tuple
    system_demand: np.ndarray
    vre_availability: np.ndarray

    @property
    def num_days(self) -> int:
        return len(self.system_demand) // INTERVALS_PER_DAY

    def daily(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.num_days * INTERVALS_PER_DAY
        return (self.system_demand[:n].reshape(-1, INTERVALS_PER_DAY),
                self.vre_availability[:n].reshape(-1, INTERVALS_PER_DAY))


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def load_traces(paths) -> list[RawTrace]:
    """Read trace CSVs with header ``timestamp,demand_mw,vre_availability[,scenario]``.

    A file without a ``scenario`` column is one scenario named after the file
    stem.  Rows must be half-hourly and cover whole days.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    series: dict[str, dict[str, list]] = {}
    for path in map(Path, paths):
        with _open_text(path) as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise TraceFormatError(f"{path}: empty file") from None
            required = ["timestamp", "demand_mw", "vre_availability"]
            missing = [c for c in required if c not in header]
            if missing:
                raise TraceFormatError(f"{path}: missing column(s) {missing}")
            ix = {c: header.index(c) for c in header}
            default_id = path.name.split(".")[0]
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                try:
                    ts = datetime.fromisoformat(row[ix["timestamp"]].strip())
                    dem = float(row[ix["demand_mw"]])
                    av = float(row[ix["vre_availability"]])
                except ValueError as exc:
                    raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
                if not np.isfinite(dem) or dem < 0:
                    raise TraceFormatError(f"{path}:{lineno}: demand_mw must be non-negative, got {dem}")
                if not (0.0 <= av <= 1.0):
                    raise TraceFormatError(f"{path}:{lineno}: vre_availability must lie in [0, 1], got {av}")
                sid = row[ix["scenario"]].strip() if "scenario" in ix else default_id
                s = series.setdefault(sid, {"ts": [], "d": [], "a": [], "line": []})
                s["ts"].append(ts)
                s["d"].append(dem)
                s["a"].append(av)
                s["line"].append(f"{path}:{lineno}")
    traces = []
    for sid, s in series.items():
        ts = s["ts"]
        for k in range(1, len(ts)):
            if ts[k] - ts[k - 1] != INTERVAL:
                raise TraceFormatError(
                    f"{s['line'][k]}: interval of {ts[k] - ts[k - 1]} in scenario {sid}; "
                    "traces must be half-hourly")
        if len(ts) % INTERVALS_PER_DAY:
            raise TraceFormatError(f"scenario {sid}: {len(ts)} points is not a whole number of days")
        traces.append(RawTrace(sid, tuple(ts), np.asarray(s["d"]), np.asarray(s["a"])))
    return traces


def write_traces(traces, path) -> Path:
    """Write traces in the combined (``scenario`` column) layout."""
    path = Path(path)
    opener = (lambda: io.TextIOWrapper(gzip.GzipFile(path, "wb", mtime=0), newline="")) \
        if path.suffix == ".gz" else (lambda: open(path, "w", newline=""))
    with opener() as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "timestamp", "demand_mw", "vre_availability"])
        for tr in traces:
            for ts, d, a in zip(tr.timestamps, tr.system_demand, tr.vre_availability):
                w.writerow([tr.scenario_id, ts.isoformat(), repr(float(d)), repr(float(a))])
    return path


def uniform_probabilities(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def size_vre_capacity(traces, rps: float, probabilities=None) -> float:
    """VRE capacity (MW) whose expected energy equals ``rps`` x expected demand energy."""
    if not 0 <= rps <= 1:
        raise SizingError("rps must lie in [0, 1]")
    if rps == 0:
        return 0.0
    p = uniform_probabilities(len(traces)) if probabilities is None else np.asarray(probabilities)
    demand_energy = sum(pi * float(np.sum(t.system_demand)) for pi, t in zip(p, traces))
    vre_energy_per_mw = sum(pi * float(np.sum(t.vre_availability)) for pi, t in zip(p, traces))
    if vre_energy_per_mw <= 0:
        raise SizingError("cannot meet a positive RPS with zero VRE availability")
    return rps * demand_energy / vre_energy_per_mw


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray  # cluster id per input row, clusters numbered by first member
    weights: np.ndarray  # members per cluster
    centroids: np.ndarray  # (k, m) per-feature means
    medoids: np.ndarray  # (k,) index of the member closest to its centroid
    merges: tuple  # ((members_a, members_b, ward_cost), ...) in merge order

    @property
    def k(self) -> int:
        return len(self.weights)


def ward_cluster(features, k: int) -> ClusterResult:
    """Agglomerative clustering with Ward's minimum-variance linkage.

    The merge cost of clusters A and B is the increase in within-cluster sum
    of squares, ``|A||B|/(|A|+|B|) * ||mean(A) - mean(B)||^2``, updated with the
    Lance-Williams recurrence.  Ties go to the lowest (i, j) index pair.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D array (days x features)")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    sq = np.sum(X * X, axis=1)
    D = 0.5 * np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    active = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    merges = []
    iu = np.triu(np.ones((n, n), dtype=bool), 1)
    for _ in range(n - k):
        masked = np.where(iu & active[:, None] & active[None, :], D, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n)
        ni, nj = size[i], size[j]
        dij = D[i, j]
        nk = size
        new = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * dij) / (ni + nj + nk)
        merges.append((tuple(members[i]), tuple(members[j]), float(dij)))
        D[i, :] = new
        D[:, i] = new
        D[i, i] = np.inf
        D[j, :] = np.inf
        D[:, j] = np.inf
        size[i] = ni + nj
        active[j] = False
        members[i] = sorted(members[i] + members.pop(j))
    roots = sorted(members, key=lambda r: members[r][0])
    labels = np.empty(n, dtype=int)
    for c, r in enumerate(roots):
        labels[members[r]] = c
    weights = np.array([len(members[r]) for r in roots], dtype=float)
    centroids = np.array([X[members[r]].mean(axis=0) for r in roots])
    medoids = np.array([members[r][int(np.argmin(np.sum((X[members[r]] - centroids[c]) ** 2, axis=1)))]
                        for c, r in enumerate(roots)])
    return ClusterResult(labels, weights, centroids, medoids, tuple(merges))


@dataclass(frozen=True)
class RepDay:
    strip_demand: np.ndarray  # (strips, intervals) MW
    vre_availability: np.ndarray  # (intervals,)
    weight: float  # days represented
    source_days: tuple = ()

    @property
    def num_intervals(self) -> int:
        return self.vre_availability.shape[0]


@dataclass(frozen=True)
class Scenario:
    id: str
    probability: float
    rep_days: tuple
    interval_hours: float = 0.5

    @classmethod
    def from_arrays(cls, id, probability, demand, vre_availability=None, weight=1.0, interval_hours=1.0):
        """Single-block scenario, handy for toy instances."""
        demand = np.atleast_2d(np.asarray(demand, dtype=float))
        vre = np.zeros(demand.shape[1]) if vre_availability is None else np.asarray(vre_availability, float)
        return cls(str(id), float(probability), (RepDay(demand, vre, float(weight)),), float(interval_hours))

    @cached_property
    def demand(self) -> np.ndarray:
        """(strips, T) strip demand over all representative-day intervals."""
        return np.concatenate([d.strip_demand for d in self.rep_days], axis=1)

    @cached_property
    def total_demand(self) -> np.ndarray:
        return self.demand.sum(axis=0)

    @cached_property
    def vre_availability(self) -> np.ndarray:
        return np.concatenate([d.vre_availability for d in self.rep_days])

    @cached_property
    def hours(self) -> np.ndarray:
        """Hours of the year each interval stands for (day weight x interval length)."""
        return np.concatenate([np.full(d.num_intervals, d.weight * self.interval_hours) for d in self.rep_days])

    @cached_property
    def day_index(self) -> np.ndarray:
        return np.concatenate([np.full(d.num_intervals, i) for i, d in enumerate(self.rep_days)])

    @cached_property
    def interval_index(self) -> np.ndarray:
        return np.concatenate([np.arange(d.num_intervals) for d in self.rep_days])

    @property
    def num_intervals(self) -> int:
        return int(sum(d.num_intervals for d in self.rep_days))


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    vre_capacity: float = 0.0
    strip_ids: tuple = ()
    strip_peaks: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([s.probability for s in self.scenarios])

    def __iter__(self):
        return iter(self.scenarios)

    def __len__(self):
        return len(self.scenarios)

    def violations(self, strips=(), intervals_per_day=None) -> list[tuple[str, str]]:
        out = []
        if not self.scenarios:
            return [("scenarios", "scenario set is empty")]
        if abs(float(np.sum(self.probabilities)) - 1.0) > 1e-12:
            out.append(("scenarios", "scenario probabilities must sum to 1"))
        if np.any(self.probabilities < 0):
            out.append(("scenarios", "scenario probabilities must be non-negative"))
        names = [s.id for s in strips] or list(self.strip_ids) or None
        n_strips = {s.demand.shape[0] for s in self.scenarios}
        if len(n_strips) != 1:
            out.append(("scenarios", "every scenario must carry the same strip set"))
        for sc in self.scenarios:
            dem = sc.demand
            for d, t in zip(*np.nonzero(~(dem >= 0))):
                label = names[d] if names and d < len(names) else str(d)
                out.append((f"strip {label}, t={int(t)}, scenario={sc.id}", "strip demand must be non-negative"))
            av = sc.vre_availability
            for t in np.nonzero(~((av >= 0) & (av <= 1)))[0]:
                out.append((f"vre, t={int(t)}, scenario={sc.id}", "availability must lie in [0, 1]"))
            if intervals_per_day is not None:
                for i, day in enumerate(sc.rep_days):
                    if day.num_intervals != intervals_per_day:
                        out.append((f"scenario={sc.id}, day={i}",
                                    f"representative day has {day.num_intervals} intervals, "
                                    f"expected {intervals_per_day}"))
        return out

    # -- serialisation ------------------------------------------------
    def to_json(self) -> dict:
        return {
            "format": "eimarket.scenario_set",
            "version": 1,
            "vre_capacity": self.vre_capacity,
            "strip_ids": list(self.strip_ids),
            "strip_peaks": list(self.strip_peaks),
            "metadata": self.metadata,
            "scenarios": [{
                "id": sc.id,
                "probability": sc.probability,
                "interval_hours": sc.interval_hours,
                "rep_days": [{
                    "weight": d.weight,
                    "source_days": list(d.source_days),
                    "strip_demand": d.strip_demand.tolist(),
                    "vre_availability": d.vre_availability.tolist(),
                } for d in sc.rep_days],
            } for sc in self.scenarios],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioSet":
        if doc.get("format") != "eimarket.scenario_set":
            raise ValueError("not a scenario-set document")
        if doc.get("version") != 1:
            raise ValueError(f"unsupported scenario-set version {doc.get('version')}")
        scen = tuple(Scenario(
            s["id"], float(s["probability"]),
            tuple(RepDay(np.asarray(d["strip_demand"], float), np.asarray(d["vre_availability"], float),
                         float(d["weight"]), tuple(d.get("source_days", ()))) for d in s["rep_days"]),
            float(s.get("interval_hours", 0.5)),
        ) for s in doc["scenarios"])
        return cls(scen, float(doc["vre_capacity"]), tuple(doc["strip_ids"]),
                   tuple(float(x) for x in doc["strip_peaks"]), doc.get("metadata", {}))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> "ScenarioSet":
        return cls.from_json(json.loads(Path(path).read_text()))


def split_strips(system_demand: np.ndarray, shares) -> np.ndarray:
    """Split system demand into strips; the last strip absorbs rounding so rows sum exactly."""
    d = np.atleast_1d(np.asarray(system_demand, dtype=float))
    shares = np.asarray(shares, dtype=float)
    out = shares[:, None] * d[None, :]
    out[-1] = d - out[:-1].sum(axis=0)
    return out


def day_features(demand_days: np.ndarray, avail_days: np.ndarray) -> np.ndarray:
    """Per-day feature vectors: z-scored demand profile followed by z-scored availability profile."""
    def z(a):
        sd = a.std()
        return (a - a.mean()) / sd if sd > 0 else a - a.mean()
    return np.hstack([z(demand_days), z(avail_days)])


def build_scenario_set(traces, strips, rps: float, k: int, use_medoid: bool = False,
                       energy_tolerance: float = 0.02) -> ScenarioSet:
    """Cluster each scenario-year into ``k`` weighted representative days.

    Strip peaks are taken from the raw traces so that averaging inside
    clusters cannot shrink the premium base.
    """
    vre_capacity = size_vre_capacity(traces, rps)
    shares = [s.share for s in strips]
    probs = uniform_probabilities(len(traces))
    scenarios = []
    energy_check = {}
    for tr, p in zip(traces, probs):
        dem, av = tr.daily()
        res = ward_cluster(day_features(dem, av), k)
        days = []
        for c in range(res.k):
            idx = np.nonzero(res.labels == c)[0]
            if use_medoid:
                m = res.medoids[c]
                d_prof, a_prof = dem[m], av[m]
            else:
                d_prof, a_prof = dem[idx].mean(axis=0), av[idx].mean(axis=0)
            days.append(RepDay(split_strips(d_prof, shares), a_prof, float(len(idx)), tuple(int(i) for i in idx)))
        scen = Scenario(tr.scenario_id, float(p), tuple(days), 24.0 / INTERVALS_PER_DAY)
        source = float(dem.sum())
        reduced = float(sum(d.weight * d.strip_demand.sum() for d in days))
        rel = abs(reduced - source) / source if source > 0 else 0.0
        energy_check[tr.scenario_id] = {"relative_error": rel, "within_tolerance": rel <= energy_tolerance}
        scenarios.append(scen)
    peaks = [float(max(np.max(split_strips(tr.system_demand, shares)[i]) for tr in traces))
             for i in range(len(strips))]
    meta = {
        "representative_days": k,
        "representative_day": "medoid" if use_medoid else "centroid",
        "cluster_features": "per-day z-scored demand and VRE availability profiles (96 values)",
        "probabilities": "uniform (not stated for the case study)",
        "rps": rps,
        "energy_check": energy_check,
    }
    return ScenarioSet(tuple(scenarios), vre_capacity, tuple(s.id for s in strips), tuple(peaks), meta)
