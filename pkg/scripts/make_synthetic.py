"""Generate the bundled synthetic demand/VRE traces (seeded, half-hourly, one year per scenario).

Demand has a daily double peak, a summer/winter seasonal swing and a few
multi-day heat waves per year.  VRE availability mixes a solar bell with an
AR(1) wind process, so some evening peaks coincide with low wind.
"""
from __future__ import annotations

import argparse
from datetime import datetime, timedelta

import numpy as np

from eimarket.scenarios import INTERVAL, INTERVALS_PER_DAY, RawTrace, write_traces


def make_trace(scenario_id: str, rng: np.random.Generator, days: int, base_mw: float) -> RawTrace:
    n = days * INTERVALS_PER_DAY
    hour = (np.arange(n) % INTERVALS_PER_DAY) / 2.0
    day = np.arange(n) // INTERVALS_PER_DAY
    season = np.cos(2 * np.pi * day / 365.0)  # +1 in January (southern summer)
    daily = 0.85 + 0.12 * np.exp(-((hour - 8.5) / 2.0) ** 2) + 0.28 * np.exp(-((hour - 18.5) / 2.5) ** 2) \
        - 0.12 * np.exp(-((hour - 3.5) / 3.0) ** 2)
    level = 1.0 + 0.10 * season + 0.03 * np.sin(2 * np.pi * day / 7.0)
    heat = np.zeros(days)
    for _ in range(int(rng.integers(2, 5))):
        start = int(rng.choice(np.r_[0:60, 330:365]))
        length = int(rng.integers(2, 5))
        heat[start:start + length] = rng.uniform(0.12, 0.25)
    heat_t = np.repeat(heat, INTERVALS_PER_DAY) * np.exp(-((hour - 17.0) / 4.0) ** 2)
    noise = 1.0 + rng.normal(0.0, 0.015, n)
    demand = base_mw * daily * (level + heat_t) * noise

    solar = np.clip(np.sin(np.pi * (hour - 6.0) / 13.0), 0.0, None) ** 1.5 * (0.85 + 0.15 * season)
    cloud = np.repeat(rng.beta(5.0, 2.0, days), INTERVALS_PER_DAY)
    wind = np.empty(n)
    x = 0.0
    shocks = rng.normal(0.0, 0.08, n)
    for i in range(n):
        x = 0.995 * x + shocks[i]
        wind[i] = x
    wind = 1.0 / (1.0 + np.exp(-(wind - 0.2)))
    vre = np.clip(0.5 * solar * cloud + 0.5 * wind, 0.0, 1.0)
    start = datetime(2019, 1, 1)
    stamps = tuple(start + i * INTERVAL for i in range(n))
    return RawTrace(scenario_id, stamps, np.round(demand, 3), np.round(vre, 4))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic_traces.csv.gz")
    ap.add_argument("--scenarios", type=int, default=3)
    ap.add_argument("--days", type=int, default=365)
    ap.add_argument("--base-mw", type=float, default=500.0)
    ap.add_argument("--seed", type=int, default=2020)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    traces = [make_trace(f"y{w + 1}", rng, args.days, args.base_mw) for w in range(args.scenarios)]
    write_traces(traces, args.out)
    print(f"wrote {args.out}: {args.scenarios} scenarios x {args.days} days")


if __name__ == "__main__":
    main()
