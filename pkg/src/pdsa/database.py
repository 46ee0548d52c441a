"""Snapshot database: generation, persistence and sampling.

Persisted as a directory with ``manifest.json`` (seed, model fingerprint,
counts) plus one CSV table per MC year. Floats are written with ``repr`` so
regeneration with the same case, model and seed is byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dispatch import DCNetwork, InfeasibleDispatch, Snapshot, \
    dispatch_snapshot
from .grid import NetworkCase
from .weather import HOURS_PER_YEAR, WeatherModel, generate_mc_year

log = logging.getLogger(__name__)


@dataclass
class SnapshotDB:
    snapshots: list
    seed: int
    model_fingerprint: str
    infeasible_count: int = 0

    def __len__(self) -> int:
        return len(self.snapshots)

    def sample(self, rng: np.random.Generator) -> Snapshot:
        """Uniform draw over stored snapshots."""
        if not self.snapshots:
            raise ValueError("empty snapshot database")
        return self.snapshots[int(rng.integers(len(self.snapshots)))]


def generate_db(case: NetworkCase, model: WeatherModel, years: int,
                seed: int, hours_per_year: int = HOURS_PER_YEAR,
                hour_stride: int = 1) -> SnapshotDB:
    """Generate ``years`` MC years and dispatch every ``hour_stride``-th hour.

    Infeasible hours (insufficient capacity) are excluded and counted.
    """
    dc = DCNetwork(case, case.base_topology())
    snapshots = []
    infeasible = 0
    ts = 0
    for year in range(years):
        real = generate_mc_year(model, seed, year=year, hours=hours_per_year)
        for hour in range(0, hours_per_year, hour_stride):
            try:
                snapshots.append(
                    dispatch_snapshot(case, real, hour, ts, dc=dc))
            except InfeasibleDispatch:
                infeasible += 1
            ts += 1
    if infeasible:
        log.info("excluded %d infeasible hours (load shedding at dispatch)",
                 infeasible)
    return SnapshotDB(snapshots=snapshots, seed=seed,
                      model_fingerprint=model.fingerprint(),
                      infeasible_count=infeasible)


def _columns(case: NetworkCase) -> list:
    cols = ["timestamp"]
    cols += [f"load_p:{ld.id}" for ld in case.loads]
    cols += [f"load_q:{ld.id}" for ld in case.loads]
    for m in case.machines:
        cols += [f"com:{m.id}", f"p:{m.id}", f"res:{m.id}"]
    for z in case.zones():
        cols += [f"wind_cf:{z}", f"solar_cf:{z}"]
    return cols


def save_db(db: SnapshotDB, case: NetworkCase, outdir,
            years: int = 1) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "seed": db.seed,
        "model_fingerprint": db.model_fingerprint,
        "snapshot_count": len(db.snapshots),
        "infeasible_count": db.infeasible_count,
        "years": years,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    cols = _columns(case)
    with open(out / "snapshots.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for s in db.snapshots:
            row = [s.timestamp]
            row += [repr(s.load_p[ld.id]) for ld in case.loads]
            row += [repr(s.load_q[ld.id]) for ld in case.loads]
            for m in case.machines:
                row += [int(s.committed[m.id]), repr(s.dispatch[m.id]),
                        repr(s.reserve[m.id])]
            for z in case.zones():
                row += [repr(s.wind_cf[z]), repr(s.solar_cf[z])]
            w.writerow(row)


def load_db(case: NetworkCase, dbdir) -> SnapshotDB:
    dbdir = Path(dbdir)
    manifest = json.loads((dbdir / "manifest.json").read_text())
    snapshots = []
    with open(dbdir / "snapshots.csv", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            snapshots.append(Snapshot(
                timestamp=int(row["timestamp"]),
                load_p={ld.id: float(row[f"load_p:{ld.id}"])
                        for ld in case.loads},
                load_q={ld.id: float(row[f"load_q:{ld.id}"])
                        for ld in case.loads},
                committed={m.id: row[f"com:{m.id}"] == "1"
                           for m in case.machines},
                dispatch={m.id: float(row[f"p:{m.id}"])
                          for m in case.machines},
                reserve={m.id: float(row[f"res:{m.id}"])
                         for m in case.machines},
                wind_cf={z: float(row[f"wind_cf:{z}"])
                         for z in case.zones()},
                solar_cf={z: float(row[f"solar_cf:{z}"])
                          for z in case.zones()},
            ))
    return SnapshotDB(snapshots=snapshots, seed=manifest["seed"],
                      model_fingerprint=manifest["model_fingerprint"],
                      infeasible_count=manifest["infeasible_count"])
