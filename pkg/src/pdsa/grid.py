"""Static grid model: case ingestion, validation, admittance and topology.

The case format is a single JSON file with ``buses``, ``branches``,
``machines``, ``loads``, ``base_mva`` and ``fault_rate_per_100km_year``
fields. Unknown fields are rejected. The bundled desk grid
(``pdsa/cases/desk10.json``) is the normative example.

All impedances are in per unit on the system MVA base. Branches are
symmetric pi-models (R, X series, total shunt susceptance B). Transformers
are plain branches with length 0 km.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class CaseError(Exception):
    """Raised on parse or validation failure; message names the offender."""


@dataclass(frozen=True)
class Bus:
    id: str
    kv: float
    zone: str


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    b: float
    length_km: float
    rating_mva: float
    in_service: bool = True


@dataclass(frozen=True)
class Machine:
    id: str
    bus: str
    type: str            # "sync" | "inverter"
    source: str          # "thermal" | "wind" | "solar"
    p_max: float         # MW
    h: float             # inertia constant, s (sync only)
    xd_t: float          # transient reactance X', pu on system base (sync only)
    droop: float         # governor droop, pu (sync only; 0 disables)
    reserve_mw: float    # primary reserve capability, MW
    fuel_cost: float     # EUR/MWh


@dataclass(frozen=True)
class LoadPoint:
    id: str
    bus: str
    p_mw: float
    q_mvar: float


@dataclass(frozen=True)
class Topology:
    """Immutable snapshot of which elements are energized."""

    branches: frozenset
    machines: frozenset

    def without_branches(self, *branch_ids) -> "Topology":
        return Topology(self.branches - set(branch_ids), self.machines)

    def without_machines(self, *machine_ids) -> "Topology":
        return Topology(self.branches, self.machines - set(machine_ids))


_BUS_FIELDS = {"id", "kv", "zone"}
_BRANCH_FIELDS = {"id", "from_bus", "to_bus", "r", "x", "b", "length_km",
                  "rating_mva", "in_service"}
_MACHINE_FIELDS = {"id", "bus", "type", "source", "p_max", "h", "xd_t",
                   "droop", "reserve_mw", "fuel_cost"}
_LOAD_FIELDS = {"id", "bus", "p_mw", "q_mvar"}
_TOP_FIELDS = {"buses", "branches", "machines", "loads", "base_mva",
               "fault_rate_per_100km_year"}


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple
    branches: tuple
    machines: tuple
    loads: tuple
    base_mva: float
    fault_rate_per_100km_year: float

    def __post_init__(self):
        _validate(self)

    # --- lookup helpers -------------------------------------------------
    def bus_index(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}

    def branch(self, branch_id: str) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(branch_id)

    def machine(self, machine_id: str) -> Machine:
        for m in self.machines:
            if m.id == machine_id:
                return m
        raise KeyError(machine_id)

    def base_topology(self) -> Topology:
        return Topology(
            frozenset(br.id for br in self.branches if br.in_service),
            frozenset(m.id for m in self.machines),
        )

    def sync_machines(self) -> tuple:
        return tuple(m for m in self.machines if m.type == "sync")

    def zones(self) -> tuple:
        return tuple(sorted({b.zone for b in self.buses}))


def _validate(case: NetworkCase) -> None:
    bus_ids = [b.id for b in case.buses]
    if len(set(bus_ids)) != len(bus_ids):
        raise CaseError("duplicate bus id")
    known = set(bus_ids)
    seen = set()
    for br in case.branches:
        if br.id in seen:
            raise CaseError(f"duplicate branch id {br.id}")
        seen.add(br.id)
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise CaseError(f"branch {br.id} references unknown bus {end}")
        if br.length_km < 0:
            raise CaseError(f"branch {br.id} has negative length")
        if br.x == 0:
            raise CaseError(f"branch {br.id} has zero reactance")
    for m in case.machines:
        if m.bus not in known:
            raise CaseError(f"machine {m.id} references unknown bus {m.bus}")
        if m.type not in ("sync", "inverter"):
            raise CaseError(f"machine {m.id} has unknown type {m.type}")
        if m.type == "sync":
            if m.xd_t <= 0:
                raise CaseError(f"sync machine {m.id} requires X' > 0")
            if m.h <= 0:
                raise CaseError(f"sync machine {m.id} requires H > 0")
    for ld in case.loads:
        if ld.bus not in known:
            raise CaseError(f"load {ld.id} references unknown bus {ld.bus}")
    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive")
    islands = connected_islands(case, case.base_topology())
    if len(islands) != 1:
        raise CaseError(f"base in-service topology is not connected "
                        f"({len(islands)} islands)")


def _build(cls, row: dict, allowed: set, kind: str):
    extra = set(row) - allowed
    if extra:
        raise CaseError(f"unknown field(s) {sorted(extra)} in {kind} "
                        f"{row.get('id', '?')}")
    missing = allowed - set(row)
    # in_service is the only optional field
    missing -= {"in_service"}
    if missing:
        raise CaseError(f"missing field(s) {sorted(missing)} in {kind} "
                        f"{row.get('id', '?')}")
    return cls(**row)


def load_case(path) -> NetworkCase:
    """Parse and validate a case file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"{path}: invalid JSON at line {exc.lineno}, "
                        f"column {exc.colno}: {exc.msg}") from exc
    extra = set(raw) - _TOP_FIELDS
    if extra:
        raise CaseError(f"unknown top-level field(s) {sorted(extra)}")
    missing = _TOP_FIELDS - set(raw)
    if missing:
        raise CaseError(f"missing top-level field(s) {sorted(missing)}")
    return NetworkCase(
        buses=tuple(_build(Bus, r, _BUS_FIELDS, "bus") for r in raw["buses"]),
        branches=tuple(_build(Branch, r, _BRANCH_FIELDS, "branch")
                       for r in raw["branches"]),
        machines=tuple(_build(Machine, r, _MACHINE_FIELDS, "machine")
                       for r in raw["machines"]),
        loads=tuple(_build(LoadPoint, r, _LOAD_FIELDS, "load")
                    for r in raw["loads"]),
        base_mva=float(raw["base_mva"]),
        fault_rate_per_100km_year=float(raw["fault_rate_per_100km_year"]),
    )


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package (e.g. 'desk10')."""
    return Path(resources.files("pdsa") / "cases" / f"{name}.json")


def connected_islands(case: NetworkCase, topo: Topology) -> list:
    """Partition buses into maximal connected components.

    Buses with no in-service branch form singleton islands. The result is
    independent of branch enumeration order: islands are sorted by their
    smallest bus id and each island is a frozenset.
    """
    adj = {b.id: [] for b in case.buses}
    for br in case.branches:
        if br.id in topo.branches:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    unseen = {b.id for b in case.buses}
    islands = []
    while unseen:
        start = min(unseen)
        comp = {start}
        stack = [start]
        unseen.discard(start)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v in unseen:
                    unseen.discard(v)
                    comp.add(v)
                    stack.append(v)
        islands.append(frozenset(comp))
    return sorted(islands, key=min)


FAULT_ADMITTANCE = 1.0e6  # pu shunt conductance representing a bolted fault


def admittance(case: NetworkCase, topo: Topology, mode: str = "loadflow",
               faulted_bus: str | None = None) -> sp.csc_matrix:
    """Nodal admittance matrix for the given topology.

    mode:
      - "loadflow":     branch pi-models only
      - "faulted":      loadflow plus a large shunt at ``faulted_bus``
      - "subtransient": loadflow plus machine X' shunts (sync machines
                        in ``topo.machines``)
    """
    if not topo.branches and not case.buses:
        raise CaseError("empty topology requested")
    idx = case.bus_index()
    n = len(case.buses)
    y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if br.id not in topo.branches:
            continue
        i, j = idx[br.from_bus], idx[br.to_bus]
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b
        y[i, i] += ys + ysh
        y[j, j] += ys + ysh
        y[i, j] -= ys
        y[j, i] -= ys
    if mode == "faulted":
        if faulted_bus is None:
            raise CaseError("faulted mode requires a bus")
        y[idx[faulted_bus], idx[faulted_bus]] += FAULT_ADMITTANCE
    elif mode == "subtransient":
        for m in case.machines:
            if m.type == "sync" and m.id in topo.machines:
                y[idx[m.bus], idx[m.bus]] += 1.0 / complex(0.0, m.xd_t)
    elif mode != "loadflow":
        raise CaseError(f"unknown admittance mode {mode}")
    return sp.csc_matrix(y)


def thevenin_impedance(case: NetworkCase, topo: Topology, bus_id: str,
                       mode: str = "subtransient") -> complex:
    """Driving-point Thevenin impedance at a bus, restricted to its island.

    Returns ``inf`` for a bus whose island contains no admittance path to
    a source (singular island block).
    """
    islands = connected_islands(case, topo)
    island = next(isl for isl in islands if bus_id in isl)
    idx = case.bus_index()
    rows = sorted(idx[b] for b in island)
    y = admittance(case, topo, mode).toarray()[np.ix_(rows, rows)]
    k = rows.index(idx[bus_id])
    try:
        zcol = np.linalg.solve(y, np.eye(len(rows))[:, k])
    except np.linalg.LinAlgError:
        return complex(np.inf)
    z = zcol[k]
    if not np.isfinite(z):
        return complex(np.inf)
    return complex(z)
