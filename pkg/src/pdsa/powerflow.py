"""Newton-Raphson AC power flow used to initialise dynamic simulations.

Buses holding an online synchronous machine are PV buses at 1.0 pu; one of
them (the largest online machine) is the slack. Inverter plants inject
constant P at zero Q, loads are constant PQ. Solved in polar form on the
full in-service topology.
"""

from __future__ import annotations

import numpy as np

from .dispatch import Snapshot
from .grid import NetworkCase, Topology, admittance


class PowerFlowError(Exception):
    pass


def solve_initial_state(case: NetworkCase, topo: Topology, snap: Snapshot,
                        tol: float = 1e-10, max_iter: int = 40):
    """Return (V complex per bus, slack machine id, machine P/Q in pu).

    Machine P is the snapshot dispatch except for the slack machine, which
    absorbs network losses.
    """
    idx = case.bus_index()
    n = len(case.buses)
    base = case.base_mva

    online_sync = [m for m in case.sync_machines()
                   if m.id in topo.machines and snap.committed[m.id]]
    if not online_sync:
        raise PowerFlowError("no online synchronous machine")
    slack_m = max(online_sync, key=lambda m: (m.p_max, m.id))
    slack = idx[slack_m.bus]

    pv = sorted({idx[m.bus] for m in online_sync} - {slack})
    pq = sorted(set(range(n)) - set(pv) - {slack})

    p_spec = np.zeros(n)
    q_spec = np.zeros(n)
    for m in case.machines:
        if m.id not in topo.machines:
            continue
        p_spec[idx[m.bus]] += snap.dispatch[m.id] / base
    for ld in case.loads:
        p_spec[idx[ld.bus]] -= snap.load_p[ld.id] / base
        q_spec[idx[ld.bus]] -= snap.load_q[ld.id] / base

    y = admittance(case, topo, "loadflow").toarray()
    vm = np.ones(n)
    va = np.zeros(n)

    for _ in range(max_iter):
        v = vm * np.exp(1j * va)
        s = v * np.conj(y @ v)
        dp = p_spec - s.real
        dq = q_spec - s.imag
        mis = np.concatenate([dp[pv + pq], dq[pq]])
        if np.max(np.abs(mis)) < tol:
            return v, slack_m, _machine_sq(case, topo, snap, v, y, slack_m)
        j = _jacobian(y, v, pv + pq, pq)
        try:
            dx = np.linalg.solve(j, mis)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError("singular Jacobian") from exc
        na = len(pv) + len(pq)
        va[pv + pq] += dx[:na]
        vm[pq] += dx[na:]
    raise PowerFlowError("power flow did not converge")


def _jacobian(y, v, ang_buses, mag_buses):
    n = len(v)
    ibus = y @ v
    diag_v = np.diag(v)
    diag_i = np.diag(ibus)
    diag_e = np.diag(v / np.abs(v))
    ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dvm = diag_v @ np.conj(y @ diag_e) + np.conj(diag_i) @ diag_e
    j11 = ds_dva[np.ix_(ang_buses, ang_buses)].real
    j12 = ds_dvm[np.ix_(ang_buses, mag_buses)].real
    j21 = ds_dva[np.ix_(mag_buses, ang_buses)].imag
    j22 = ds_dvm[np.ix_(mag_buses, mag_buses)].imag
    return np.block([[j11, j12], [j21, j22]])


def _machine_sq(case, topo, snap, v, y, slack_m):
    """Per-machine (P, Q) in pu; bus reactive output split by p_max share,
    slack machine absorbs the loss mismatch on its bus."""
    idx = case.bus_index()
    base = case.base_mva
    s_inj = v * np.conj(y @ v)
    out = {}
    for bus_i in {idx[m.bus] for m in case.sync_machines()
                  if m.id in topo.machines and snap.committed[m.id]}:
        machines = [m for m in case.sync_machines()
                    if idx[m.bus] == bus_i and m.id in topo.machines
                    and snap.committed[m.id]]
        # net injection at the bus = gen - load - inverters; recover gen S
        p_other = sum(snap.dispatch[m.id] / base for m in case.machines
                      if m.type == "inverter" and m.id in topo.machines
                      and idx[m.bus] == bus_i)
        p_load = sum(snap.load_p[ld.id] / base for ld in case.loads
                     if idx[ld.bus] == bus_i)
        q_load = sum(snap.load_q[ld.id] / base for ld in case.loads
                     if idx[ld.bus] == bus_i)
        p_gen = s_inj[bus_i].real + p_load - p_other
        q_gen = s_inj[bus_i].imag + q_load
        wsum = sum(m.p_max for m in machines)
        for m in machines:
            w = m.p_max / wsum
            if m.id == slack_m.id:
                # dispatch share for the others, remainder to the slack
                p_m = p_gen - sum(snap.dispatch[o.id] / base
                                  for o in machines if o.id != m.id)
            else:
                p_m = snap.dispatch[m.id] / base
            out[m.id] = (p_m, q_gen * w)
    return out
