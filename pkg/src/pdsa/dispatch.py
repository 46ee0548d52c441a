"""N-1 preventive dispatch of one hourly realization.

Commitment is merit order (cheapest fuel first); the dispatch itself is a
small LP: minimise fuel cost subject to energy balance, base-case DC flow
limits, post-single-outage DC flow limits via line outage distribution
factors (LODF), and a primary-reserve requirement equal to the largest
committed unit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .grid import NetworkCase, Topology
from .weather import YearRealization


class InfeasibleDispatch(Exception):
    """Insufficient committed capacity; snapshot excluded from the DB."""


class DCNetwork:
    """DC sensitivities (PTDF, LODF) for a case and topology."""

    def __init__(self, case: NetworkCase, topo: Topology):
        self.case = case
        self.topo = topo
        self.bus_idx = case.bus_index()
        self.branches = [br for br in case.branches if br.id in topo.branches]
        n = len(case.buses)
        m = len(self.branches)
        a = np.zeros((m, n))
        bd = np.zeros(m)
        for k, br in enumerate(self.branches):
            a[k, self.bus_idx[br.from_bus]] = 1.0
            a[k, self.bus_idx[br.to_bus]] = -1.0
            bd[k] = 1.0 / br.x
        bbus = a.T @ np.diag(bd) @ a
        # slack = first bus; zero its row/column, invert the rest
        red = np.delete(np.delete(bbus, 0, axis=0), 0, axis=1)
        xinv = np.zeros((n, n))
        xinv[1:, 1:] = np.linalg.inv(red)
        self.ptdf = np.diag(bd) @ a @ xinv   # m x n, slack column ~0
        self.ratings = np.array([br.rating_mva for br in self.branches])

    def flows(self, injections_mw: np.ndarray) -> np.ndarray:
        """Branch MW flows for a bus injection vector (must sum to ~0)."""
        return self.ptdf @ injections_mw

    def lodf(self) -> np.ndarray:
        """LODF matrix; column o is the sensitivity to outage of branch o.

        Bridge branches (whose outage islands the network) get NaN columns
        and are skipped in N-1 constraints.
        """
        m = len(self.branches)
        out = np.zeros((m, m))
        for o, br in enumerate(self.branches):
            i, j = self.bus_idx[br.from_bus], self.bus_idx[br.to_bus]
            col = self.ptdf[:, i] - self.ptdf[:, j]
            denom = 1.0 - col[o]
            if abs(denom) < 1e-8:
                out[:, o] = np.nan
                continue
            out[:, o] = col / denom
            out[o, o] = -1.0
        return out


@dataclass(frozen=True)
class Snapshot:
    """One dispatched hourly operating condition."""

    timestamp: int                  # hour index within the DB
    load_p: dict                    # load id -> MW
    load_q: dict                    # load id -> MVAr
    committed: dict                 # machine id -> bool
    dispatch: dict                  # machine id -> MW
    reserve: dict                   # machine id -> MW held
    wind_cf: dict                   # zone -> capacity factor
    solar_cf: dict                  # zone -> capacity factor

    @property
    def total_load(self) -> float:
        return float(sum(self.load_p.values()))

    @property
    def total_reserve(self) -> float:
        return float(sum(self.reserve.values()))

    def features(self, case: NetworkCase, dc: DCNetwork | None = None) -> dict:
        """Snapshot-level quantities usable for preventive decisions."""
        if dc is None:
            dc = DCNetwork(case, case.base_topology())
        feats = {"total_load": self.total_load}
        for zone in case.zones():
            wind = sum(self.dispatch.get(m.id, 0.0) for m in case.machines
                       if m.source == "wind"
                       and next(b.zone for b in case.buses if b.id == m.bus)
                       == zone)
            feats[f"wind_{zone}"] = wind
        for m in case.machines:
            feats[f"plant_{m.id}"] = self.dispatch.get(m.id, 0.0)
        inj = injection_vector(case, self)
        for k, br in enumerate(dc.branches):
            feats[f"flow_{br.id}"] = float(dc.flows(inj)[k])
        return feats


def injection_vector(case: NetworkCase, snap: Snapshot) -> np.ndarray:
    inj = np.zeros(len(case.buses))
    idx = case.bus_index()
    for m in case.machines:
        inj[idx[m.bus]] += snap.dispatch.get(m.id, 0.0)
    for ld in case.loads:
        inj[idx[ld.bus]] -= snap.load_p[ld.id]
    return inj


def _commit(case: NetworkCase, net_load: float) -> list:
    """Merit-order commitment covering net load + reserve requirement."""
    order = sorted(case.sync_machines(), key=lambda m: (m.fuel_cost, m.id))
    committed = []
    for m in order:
        committed.append(m)
        req = max(u.p_max for u in committed)
        cap = sum(u.p_max for u in committed)
        rescap = sum(u.reserve_mw for u in committed)
        if cap >= net_load + req and rescap >= req:
            break
    return committed


def dispatch_snapshot(case: NetworkCase, realization: YearRealization,
                      hour: int, timestamp: int,
                      dc: DCNetwork | None = None) -> Snapshot:
    """Dispatch one hour; raises InfeasibleDispatch if capacity is short."""
    if dc is None:
        dc = DCNetwork(case, case.base_topology())
    zone_of = {b.id: b.zone for b in case.buses}

    load_p = {ld.id: ld.p_mw * realization.load_mult[hour]
              for ld in case.loads}
    load_q = {ld.id: ld.q_mvar * realization.load_mult[hour]
              for ld in case.loads}
    total_load = sum(load_p.values())

    renewables = [m for m in case.machines if m.type == "inverter"]
    avail = {}
    for m in renewables:
        zone = zone_of[m.bus]
        cf = (realization.wind_cf[zone][hour] if m.source == "wind"
              else realization.solar_cf[zone][hour])
        avail[m.id] = m.p_max * cf

    net_load = max(0.0, total_load - sum(avail.values()))
    committed = _commit(case, net_load)
    order = sorted(case.sync_machines(), key=lambda m: (m.fuel_cost, m.id))
    while True:
        result = _solve_lp(case, dc, committed, renewables, avail,
                           load_p, total_load)
        if result is not None:
            break
        if len(committed) == len(order):
            raise InfeasibleDispatch(
                f"hour {timestamp}: no feasible N-1 dispatch")
        committed = order[:len(committed) + 1]
    p_sync, p_ren, r_sync = result

    dispatch = {}
    reserve = {}
    is_committed = {}
    for m in case.machines:
        is_committed[m.id] = False
        dispatch[m.id] = 0.0
        reserve[m.id] = 0.0
    for m, p, r in zip(committed, p_sync, r_sync):
        is_committed[m.id] = True
        dispatch[m.id] = float(p)
        reserve[m.id] = float(r)
    for m, p in zip(renewables, p_ren):
        is_committed[m.id] = p > 0.0
        dispatch[m.id] = float(p)

    wind_cf = {}
    solar_cf = {}
    for zone in case.zones():
        wind_cf[zone] = float(realization.wind_cf[zone][hour])
        solar_cf[zone] = float(realization.solar_cf[zone][hour])

    return Snapshot(timestamp=timestamp, load_p=load_p, load_q=load_q,
                    committed=is_committed, dispatch=dispatch,
                    reserve=reserve, wind_cf=wind_cf, solar_cf=solar_cf)


def _solve_lp(case, dc: DCNetwork, committed, renewables, avail, load_p,
              total_load):
    """LP dispatch; returns (p_sync, p_ren, reserve) or None if infeasible."""
    ng, nr = len(committed), len(renewables)
    nv = ng + nr + ng   # sync P, renewable P, sync reserve
    idx = dc.bus_idx
    nbus = len(case.buses)

    gmap = np.zeros((nbus, nv))
    for k, m in enumerate(committed):
        gmap[idx[m.bus], k] = 1.0
    for k, m in enumerate(renewables):
        gmap[idx[m.bus], ng + k] = 1.0
    dvec = np.zeros(nbus)
    for ld in case.loads:
        dvec[idx[ld.bus]] -= load_p[ld.id]

    # tiny negative cost on renewables: curtail only when needed
    cost = np.concatenate([
        np.array([m.fuel_cost for m in committed]),
        np.full(nr, -1e-3),
        np.zeros(ng),
    ])

    a_eq = np.zeros((1, nv))
    a_eq[0, :ng + nr] = 1.0
    b_eq = np.array([total_load])

    rows = []
    rhs = []
    flow_of_x = dc.ptdf @ gmap            # m x nv
    flow_of_d = dc.ptdf @ dvec            # m
    ratings = dc.ratings
    for sign in (1.0, -1.0):
        rows.append(sign * flow_of_x)
        rhs.append(ratings - sign * flow_of_d)
    lodf = dc.lodf()
    m = len(dc.branches)
    for o in range(m):
        if np.isnan(lodf[0, o]):
            continue
        post_x = flow_of_x + np.outer(lodf[:, o], flow_of_x[o])
        post_d = flow_of_d + lodf[:, o] * flow_of_d[o]
        keep = np.arange(m) != o
        for sign in (1.0, -1.0):
            rows.append(sign * post_x[keep])
            rhs.append(ratings[keep] - sign * post_d[keep])
    # reserve: r_k + p_k <= p_max ; sum r >= requirement
    for k, mach in enumerate(committed):
        row = np.zeros(nv)
        row[k] = 1.0
        row[ng + nr + k] = 1.0
        rows.append(row[None, :])
        rhs.append(np.array([mach.p_max]))
    req = max(mach.p_max for mach in committed)
    row = np.zeros(nv)
    row[ng + nr:] = -1.0
    rows.append(row[None, :])
    rhs.append(np.array([-req]))

    a_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    bounds = ([(0.0, mach.p_max) for mach in committed]
              + [(0.0, avail[mach.id]) for mach in renewables]
              + [(0.0, mach.reserve_mw) for mach in committed])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if not res.success:
        return None
    x = res.x
    return x[:ng], x[ng:ng + nr], x[ng + nr:]
