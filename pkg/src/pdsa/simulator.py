"""Time-domain cascade simulation of a contingency on a snapshot.

Machine model is the classical second-order swing equation (constant E'
behind X'), loads are constant impedance, inverter plants constant-P
negative loads with an undervoltage fault-ride-through limit. Protection
systems (distance relays with load blinder, UFLS, generator undervoltage
and loss-of-synchronism, inverter ride-through) act through circuit
breakers with sampled opening times.

Integration is fixed-step Heun (explicit trapezoidal): 5 ms while a fault
is applied, 10 ms otherwise, so event timing is reproducible to the step.

``simulate`` is a pure function of its inputs; concurrent calls share no
mutable state.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .contingencies import Contingency
from .costs import consequences_cost, energy_not_served_mwh
from .dispatch import Snapshot
from .grid import FAULT_ADMITTANCE, NetworkCase, Topology, \
    connected_islands
from .powerflow import PowerFlowError, solve_initial_state
from .protection import ProtectionParamSet, sample_protection_params


@dataclass(frozen=True)
class Event:
    time: float
    device: str
    kind: str      # line trip | generator trip | UFLS stage |
                   # island collapse | fault cleared

    def key(self):
        return (self.device, self.kind)


@dataclass(frozen=True)
class SimOptions:
    f0: float = 50.0
    horizon: float = 120.0
    dt: float = 0.010
    dt_fault: float = 0.005
    fault_time: float = 0.1
    clearing_time: float = 0.200
    damping: float = 2.0              # pu power per pu speed, machine base
    settle_band_hz: float = 0.01
    settle_window: float = 10.0
    voltage_steady_tol: float = 1e-4
    zones: tuple = ((0.8, 0.0), (1.2, 0.3), (2.5, 1.0))
    blinder_margin: float = 1.5
    ufls_thresholds: tuple = (49.0, 48.7, 48.4, 48.1)
    ufls_fraction: float = 0.10
    ufls_pickup: float = 0.100
    gen_uv_pu: float = 0.85
    gen_uv_delay: float = 1.5
    inv_uv_pu: float = 0.50
    inv_ride_through: float = 0.150
    collapse_freq: float = 47.5
    residual_tol: float = 1e-8
    record_trace: bool = False


@dataclass(frozen=True)
class ScenarioResult:
    events: tuple
    shadow_events: tuple | None
    shed_mw: float
    total_load_mw: float
    energy_not_served_mwh: float
    cost_eur: float
    terminal: str                 # stabilized | partial blackout |
                                  # full blackout
    solver_failure: bool
    wall_time_s: float
    max_residual: float
    trace: list | None = None


class SolverFailure(Exception):
    pass


def contingency_script(contingency: Contingency, options: SimOptions):
    """Scripted fault application and clearing for a contingency."""
    t0 = options.fault_time
    script = [(t0, "set_fault", contingency.fault_bus)]
    opened = [contingency.branch]
    if contingency.second_branch is not None:
        opened.append(contingency.second_branch)
    script.append((t0 + options.clearing_time, "clear_fault",
                   contingency.fault_bus))
    for br in opened:
        script.append((t0 + options.clearing_time, "trip_line", br))
    return script, opened


def simulate(case: NetworkCase, snapshot: Snapshot,
             contingency: Contingency | None = None,
             params: ProtectionParamSet | None = None,
             options: SimOptions | None = None,
             shadow_params: ProtectionParamSet | None = None,
             scripted=(), topo: Topology | None = None) -> ScenarioResult:
    """Simulate a scenario and evaluate its consequences.

    ``shadow_params`` installs a second protection set that observes the
    same trajectory and records would-trip events without acting.
    """
    options = options or SimOptions()
    params = params or sample_protection_params(case, "nominal")
    t_start = _time.perf_counter()
    total_load = snapshot.total_load
    try:
        sim = _Sim(case, snapshot, options, params, shadow_params,
                   topo=topo)
        script = list(scripted)
        suppressed = set()
        if contingency is not None:
            cscript, opened = contingency_script(contingency, options)
            script += cscript
            for br in opened:
                b = case.branch(br)
                suppressed.add(f"{br}:{b.from_bus}")
                suppressed.add(f"{br}:{b.to_bus}")
        sim.suppressed_relays = suppressed
        sim.run(sorted(script, key=lambda e: e[0]))
        shed = sim.shed_mw()
        solver_failure = False
        events = tuple(sim.events)
        shadow = tuple(sim.shadow_events) if shadow_params else None
        max_residual = sim.max_residual
        trace = sim.trace if options.record_trace else None
    except (SolverFailure, PowerFlowError):
        # conservative: numerical failure counted as a full blackout
        shed = total_load
        solver_failure = True
        events = ()
        shadow = () if shadow_params else None
        max_residual = math.inf
        trace = None
    cost = consequences_cost(shed, total_load) if total_load > 0 else 0.0
    if shed >= total_load - 1e-6 and total_load > 0:
        terminal = "full blackout"
    elif shed > 1e-6:
        terminal = "partial blackout"
    else:
        terminal = "stabilized"
    return ScenarioResult(
        events=events, shadow_events=shadow, shed_mw=shed,
        total_load_mw=total_load,
        energy_not_served_mwh=energy_not_served_mwh(shed, total_load),
        cost_eur=cost, terminal=terminal, solver_failure=solver_failure,
        wall_time_s=_time.perf_counter() - t_start,
        max_residual=max_residual, trace=trace)


class _Sim:
    """Mutable state of one simulation run."""

    def __init__(self, case, snap, options, params, shadow_params,
                 topo=None):
        self.case = case
        self.snap = snap
        self.opt = options
        self.params = params
        self.shadow = shadow_params
        self.base = case.base_mva
        self.ws = 2.0 * math.pi * options.f0
        self.idx = case.bus_index()
        self.nb = len(case.buses)

        topo = topo or case.base_topology()
        self.branch_on = {br.id: (br.id in topo.branches)
                          for br in case.branches}

        v0, slack_m, msq = solve_initial_state(case, topo, snap)

        self.machines = [m for m in case.sync_machines()]
        self.m_on = np.array([m.id in msq for m in self.machines])
        nm = len(self.machines)
        self.e_mag = np.zeros(nm)
        self.delta = np.zeros(nm)
        self.pm = np.zeros(nm)
        self.minert = np.ones(nm)
        self.spu = np.zeros(nm)
        self.res_pu = np.zeros(nm)
        self.droop = np.zeros(nm)
        self.xdt = np.array([max(m.xd_t, 1e-6) for m in self.machines])
        for k, m in enumerate(self.machines):
            self.spu[k] = m.p_max / self.base
            self.minert[k] = max(2.0 * m.h * self.spu[k], 1e-9)
            self.droop[k] = m.droop
            self.res_pu[k] = snap.reserve[m.id] / self.base
            if self.m_on[k]:
                p, q = msq[m.id]
                v = v0[self.idx[m.bus]]
                i = np.conj(complex(p, q) / v)
                e = v + 1j * self.xdt[k] * i
                self.e_mag[k] = abs(e)
                self.delta[k] = np.angle(e)
                self.pm[k] = p
        self.domega = np.zeros(nm)

        self.inverters = [m for m in case.machines if m.type == "inverter"]
        self.inv_on = np.array([m.id in topo.machines
                                and snap.dispatch[m.id] > 0.0
                                for m in self.inverters])
        self.inv_p = np.array([snap.dispatch[m.id] / self.base
                               for m in self.inverters])

        self.load_scale = {ld.id: 1.0 for ld in case.loads}
        self.load_y0 = {}
        for ld in case.loads:
            v = v0[self.idx[ld.bus]]
            s = complex(snap.load_p[ld.id], snap.load_q[ld.id]) / self.base
            self.load_y0[ld.id] = np.conj(s) / abs(v) ** 2

        self.fault_bus = None
        self.v = v0.copy()
        self.v_prev = v0.copy()
        self.events = []
        self.shadow_events = []
        self.shadow_seen = set()
        self.pending = []          # (time, action, payload)
        self.suppressed_relays = set()
        self.max_residual = 0.0
        self.trace = [] if options.record_trace else None
        self.time = 0.0

        # protection timer state
        self.relay_entered = {}     # (relay, zone, set) -> entry time
        self.ufls_entered = {}      # (load, stage, set) -> entry time
        self.ufls_done = set()      # (load, stage, set)
        self.gen_uv_entered = {}
        self.inv_uv_entered = {}
        self.gen_pending = set()
        self.inv_pending = set()
        self.line_pending = set()
        self.shadow_gen_seen = set()

        self._topology_changed()

    # --- topology / islands ---------------------------------------------
    def _topology_changed(self):
        topo = Topology(frozenset(b for b, on in self.branch_on.items()
                                  if on), frozenset())
        self.islands = connected_islands(self.case, topo)
        self.bus_island = {}
        for i, isl in enumerate(self.islands):
            for b in isl:
                self.bus_island[b] = i
        self._collapse_dead_islands()
        self._rebuild_matrix()

    def _island_has_sync(self, i):
        return any(self.m_on[k]
                   and self.bus_island[self.machines[k].bus] == i
                   for k in range(len(self.machines)))

    def _collapse_dead_islands(self):
        for i, isl in enumerate(self.islands):
            alive = self._island_has_sync(i)
            if alive:
                continue
            affected = False
            for ld in self.case.loads:
                if ld.bus in isl and self.load_scale[ld.id] > 0.0:
                    self.load_scale[ld.id] = 0.0
                    affected = True
            for k, m in enumerate(self.inverters):
                if m.bus in isl and self.inv_on[k]:
                    self.inv_on[k] = False
                    affected = True
            for k, m in enumerate(self.machines):
                if m.bus in isl and self.m_on[k]:
                    self.m_on[k] = False
                    affected = True
            if affected:
                self._record(Event(self.time, f"island:{min(isl)}",
                                   "island collapse"))
        self.active_islands = [i for i in range(len(self.islands))
                               if self._island_has_sync(i)]
        self.energized = sorted(
            self.idx[b] for i in self.active_islands
            for b in self.islands[i])

    def _collapse_island(self, i):
        isl = self.islands[i]
        for ld in self.case.loads:
            if ld.bus in isl:
                self.load_scale[ld.id] = 0.0
        for k, m in enumerate(self.inverters):
            if m.bus in isl:
                self.inv_on[k] = False
        for k, m in enumerate(self.machines):
            if m.bus in isl:
                self.m_on[k] = False
        self._record(Event(self.time, f"island:{min(isl)}",
                           "island collapse"))
        self._collapse_dead_islands()
        self._rebuild_matrix()

    def _rebuild_matrix(self):
        n = self.nb
        y = np.zeros((n, n), dtype=complex)
        for br in self.case.branches:
            if not self.branch_on[br.id]:
                continue
            i, j = self.idx[br.from_bus], self.idx[br.to_bus]
            ys = 1.0 / complex(br.r, br.x)
            ysh = 0.5j * br.b
            y[i, i] += ys + ysh
            y[j, j] += ys + ysh
            y[i, j] -= ys
            y[j, i] -= ys
        for ld in self.case.loads:
            y[self.idx[ld.bus], self.idx[ld.bus]] += (
                self.load_y0[ld.id] * self.load_scale[ld.id])
        for k, m in enumerate(self.machines):
            if self.m_on[k]:
                y[self.idx[m.bus], self.idx[m.bus]] += 1.0 / complex(
                    0.0, self.xdt[k])
        if self.fault_bus is not None:
            y[self.idx[self.fault_bus], self.idx[self.fault_bus]] += \
                FAULT_ADMITTANCE
        self.ydyn = y
        rows = getattr(self, "energized", [])
        self.energized_set = set(rows)
        self.row_pos = {r: k for k, r in enumerate(rows)}
        if rows:
            ye = y[np.ix_(rows, rows)]
            self.ye = ye
            try:
                self.ye_inv = np.linalg.inv(ye)
            except np.linalg.LinAlgError as exc:
                raise SolverFailure("singular network matrix") from exc
        else:
            self.ye = None
            self.ye_inv = None

    # --- network solution -------------------------------------------------
    def _solve_network(self, delta):
        """Bus voltages for machine angles ``delta``; fixed-point on the
        constant-P inverter injections. Returns (V, residual)."""
        rows = self.energized
        if not rows:
            return np.zeros(self.nb, dtype=complex), 0.0
        ye = self.ye
        pos = self.row_pos
        inorton = np.zeros(len(rows), dtype=complex)
        for k, m in enumerate(self.machines):
            if self.m_on[k]:
                r = self.idx[m.bus]
                if r in pos:
                    e = self.e_mag[k] * np.exp(1j * delta[k])
                    inorton[pos[r]] += e / complex(0.0, self.xdt[k])
        inv_rows = [(pos[self.idx[m.bus]], self.inv_p[k])
                    for k, m in enumerate(self.inverters)
                    if self.inv_on[k] and self.idx[m.bus] in pos]
        v = self.v[rows]
        lu = self.ye_inv
        for _ in range(60):
            iv = inorton.copy()
            for r, p in inv_rows:
                iv[r] += _inverter_current(p, v[r])
            v_new = lu @ iv
            if not np.all(np.isfinite(v_new)):
                raise SolverFailure("divergent network solution")
            if np.max(np.abs(v_new - v)) < 1e-12:
                v = v_new
                break
            v = v_new
        else:
            raise SolverFailure("inverter fixed point did not converge")
        iv = inorton.copy()
        for r, p in inv_rows:
            iv[r] += _inverter_current(p, v[r])
        residual = float(np.max(np.abs(ye @ v - iv))) if len(rows) else 0.0
        if residual > 1e-6:
            raise SolverFailure(f"network residual {residual:.2e}")
        vfull = np.zeros(self.nb, dtype=complex)
        vfull[rows] = v
        return vfull, residual

    def _electrical_power(self, delta, v):
        pe = np.zeros(len(self.machines))
        for k, m in enumerate(self.machines):
            if self.m_on[k]:
                e = self.e_mag[k] * np.exp(1j * delta[k])
                i = (e - v[self.idx[m.bus]]) / complex(0.0, self.xdt[k])
                pe[k] = (e * np.conj(i)).real
        return pe

    def _derivs(self, delta, domega):
        v, residual = self._solve_network(delta)
        pe = self._electrical_power(delta, v)
        pgov = np.zeros_like(self.pm)
        for k in range(len(self.machines)):
            if self.m_on[k] and self.droop[k] > 0.0:
                raw = -domega[k] / self.droop[k] * self.spu[k]
                pgov[k] = min(max(raw, -self.pm[k]), self.res_pu[k])
        ddelta = np.where(self.m_on, self.ws * domega, 0.0)
        acc = (self.pm + pgov - pe
               - self.opt.damping * self.spu * domega) / self.minert
        ddomega = np.where(self.m_on, acc, 0.0)
        return ddelta, ddomega, v, residual

    # --- main loop ---------------------------------------------------------
    def run(self, script):
        opt = self.opt
        script = list(script)
        settle_since = None
        while self.time < opt.horizon:
            if not self.active_islands:
                return
            dt = opt.dt_fault if self.fault_bus is not None else opt.dt
            # do not step past the next scripted or pending action
            t_next = self.time + dt
            dd1, dw1, _, _ = self._derivs(self.delta, self.domega)
            d_pred = self.delta + dt * dd1
            w_pred = self.domega + dt * dw1
            dd2, dw2, _, _ = self._derivs(d_pred, w_pred)
            self.delta = self.delta + 0.5 * dt * (dd1 + dd2)
            self.domega = self.domega + 0.5 * dt * (dw1 + dw2)
            self.time = t_next

            changed = self._apply_script(script)
            changed |= self._apply_pending()
            if changed:
                self._topology_changed()

            self.v_prev = self.v
            self.v, residual = self._solve_network(self.delta)
            self.max_residual = max(self.max_residual, residual)

            changed = self._check_protections()
            changed |= self._apply_pending()
            if changed:
                self._topology_changed()
                self.v, residual = self._solve_network(self.delta)
                self.max_residual = max(self.max_residual, residual)

            if self._check_collapse():
                continue
            if self.trace is not None:
                self._record_trace()

            if self._is_settled():
                if settle_since is None:
                    settle_since = self.time
                elif (self.time - settle_since >= opt.settle_window
                      and not script and not self.pending):
                    return
            else:
                settle_since = None

    def _apply_script(self, script):
        changed = False
        while script and script[0][0] <= self.time + 1e-12:
            _, action, payload = script.pop(0)
            if action == "set_fault":
                self.fault_bus = payload
                self._rebuild_matrix()
            elif action == "clear_fault":
                self.fault_bus = None
                self._record(Event(self.time, payload, "fault cleared"))
                self._rebuild_matrix()
            elif action == "trip_line":
                if self.branch_on.get(payload):
                    self.branch_on[payload] = False
                    self._record(Event(self.time, payload, "line trip"))
                    changed = True
            elif action == "trip_machine":
                self._trip_machine(payload)
                changed = True
            else:
                raise ValueError(f"unknown scripted action {action}")
        return changed

    def _trip_machine(self, machine_id):
        for k, m in enumerate(self.machines):
            if m.id == machine_id and self.m_on[k]:
                self.m_on[k] = False
                self._record(Event(self.time, machine_id, "generator trip"))
                return
        for k, m in enumerate(self.inverters):
            if m.id == machine_id and self.inv_on[k]:
                self.inv_on[k] = False
                self._record(Event(self.time, machine_id, "generator trip"))
                return

    def _apply_pending(self):
        changed = False
        rest = []
        for t, action, payload in self.pending:
            if t <= self.time + 1e-12:
                if action == "trip_line":
                    if self.branch_on.get(payload):
                        self.branch_on[payload] = False
                        self._record(Event(t, payload, "line trip"))
                        changed = True
                elif action == "trip_machine":
                    self._trip_machine(payload)
                    changed = True
                elif action == "ufls":
                    load_id, stage = payload
                    if self.load_scale[load_id] > 0.0:
                        self.load_scale[load_id] *= (
                            1.0 - self.opt.ufls_fraction)
                        self._record(Event(
                            t, f"ufls{stage}:{load_id}", "UFLS stage"))
                        self._rebuild_matrix()
            else:
                rest.append((t, action, payload))
        self.pending = rest
        return changed

    # --- protections ---------------------------------------------------
    def _check_protections(self):
        self._check_distance_relays()
        self._check_ufls()
        self._check_generator_protections()
        self._check_inverter_ride_through()
        return False    # actions go through the pending queue

    def _param_sets(self):
        yield "primary", self.params
        if self.shadow is not None:
            yield "shadow", self.shadow

    def _shadow_record(self, event):
        if event.key() not in self.shadow_seen:
            self.shadow_seen.add(event.key())
            self.shadow_events.append(event)

    def _record(self, event):
        self.events.append(event)
        # the acting set's events are part of both sequences
        self._shadow_record(event)

    def apparent_impedance(self, br, from_bus, v):
        i, j = self.idx[from_bus], self.idx[
            br.to_bus if br.from_bus == from_bus else br.from_bus]
        ys = 1.0 / complex(br.r, br.x)
        cur = (v[i] - v[j]) * ys + v[i] * 0.5j * br.b
        if abs(cur) < 1e-6:
            return None
        return v[i] / cur

    def _check_distance_relays(self):
        opt = self.opt
        for br in self.case.branches:
            if not self.branch_on[br.id]:
                continue
            zline = complex(br.r, br.x)
            zblind = (self.base / br.rating_mva) / opt.blinder_margin
            for end in (br.from_bus, br.to_bus):
                relay = f"{br.id}:{end}"
                if relay in self.suppressed_relays:
                    continue
                if self.idx[end] not in self.energized_set:
                    continue
                z = self.apparent_impedance(br, end, self.v)
                for setname, params in self._param_sets():
                    zm = params.z_mult[relay]
                    pickup = params.pickup_delay[relay]
                    bt = params.breaker_time[relay]
                    for zone, (pct, delay) in enumerate(opt.zones):
                        key = (relay, zone, setname)
                        inside = False
                        if z is not None and abs(z) < zblind:
                            c = zline * (pct * zm) / 2.0
                            inside = abs(z - c) <= abs(c) * (1 + 1e-9)
                        if not inside:
                            self.relay_entered.pop(key, None)
                            continue
                        entered = self.relay_entered.setdefault(
                            key, self.time)
                        if self.time - entered + 1e-9 < delay + pickup:
                            continue
                        t_open = self.time + bt
                        if setname == "primary":
                            if (br.id, "line") not in self.line_pending:
                                self.line_pending.add((br.id, "line"))
                                self.pending.append(
                                    (t_open, "trip_line", br.id))
                        else:
                            self._shadow_record(
                                Event(t_open, br.id, "line trip"))

    def island_frequency(self, island_index):
        num = 0.0
        den = 0.0
        for k, m in enumerate(self.machines):
            if self.m_on[k] and self.bus_island[m.bus] == island_index:
                num += self.minert[k] * self.domega[k]
                den += self.minert[k]
        if den == 0.0:
            return self.opt.f0
        return self.opt.f0 * (1.0 + num / den)

    def _check_ufls(self):
        opt = self.opt
        freqs = {i: self.island_frequency(i) for i in self.active_islands}
        for ld in self.case.loads:
            if self.load_scale[ld.id] <= 0.0:
                continue
            isl = self.bus_island.get(ld.bus)
            if isl not in freqs:
                continue
            f = freqs[isl]
            for stage, thr in enumerate(opt.ufls_thresholds, start=1):
                for setname, params in self._param_sets():
                    key = (ld.id, stage, setname)
                    if key in self.ufls_done:
                        continue
                    if f >= thr:
                        self.ufls_entered.pop(key, None)
                        continue
                    entered = self.ufls_entered.setdefault(key, self.time)
                    if self.time - entered + 1e-9 < opt.ufls_pickup:
                        continue
                    self.ufls_done.add(key)
                    t_act = self.time + params.breaker_time[f"ufls:{stage}"]
                    if setname == "primary":
                        self.pending.append((t_act, "ufls", (ld.id, stage)))
                    else:
                        self._shadow_record(Event(
                            t_act, f"ufls{stage}:{ld.id}", "UFLS stage"))

    def _check_generator_protections(self):
        opt = self.opt
        coi = {}
        for i in self.active_islands:
            num = den = 0.0
            for k, m in enumerate(self.machines):
                if self.m_on[k] and self.bus_island[m.bus] == i:
                    num += self.minert[k] * self.delta[k]
                    den += self.minert[k]
            coi[i] = num / den if den else 0.0
        for k, m in enumerate(self.machines):
            if not self.m_on[k] or m.id in self.gen_pending:
                continue
            isl = self.bus_island.get(m.bus)
            if isl not in coi:
                continue
            vmag = abs(self.v[self.idx[m.bus]])
            oos = abs(self.delta[k] - coi[isl]) > math.pi
            for setname, params in self._param_sets():
                bt = params.breaker_time[f"gen:{m.id}"]
                key = (m.id, setname)
                trip = False
                if oos:
                    trip = True
                elif vmag < opt.gen_uv_pu:
                    entered = self.gen_uv_entered.setdefault(key, self.time)
                    if self.time - entered + 1e-9 >= opt.gen_uv_delay:
                        trip = True
                else:
                    self.gen_uv_entered.pop(key, None)
                if not trip:
                    continue
                if setname == "primary":
                    self.gen_pending.add(m.id)
                    self.pending.append(
                        (self.time + bt, "trip_machine", m.id))
                elif m.id not in self.shadow_gen_seen:
                    self.shadow_gen_seen.add(m.id)
                    self._shadow_record(Event(
                        self.time + bt, m.id, "generator trip"))

    def _check_inverter_ride_through(self):
        opt = self.opt
        for k, m in enumerate(self.inverters):
            if not self.inv_on[k] or m.id in self.inv_pending:
                continue
            vmag = abs(self.v[self.idx[m.bus]])
            for setname, params in self._param_sets():
                key = (m.id, setname)
                if vmag >= opt.inv_uv_pu:
                    self.inv_uv_entered.pop(key, None)
                    continue
                entered = self.inv_uv_entered.setdefault(key, self.time)
                # ride-through: disconnection allowed only for faults
                # lasting longer than the ride-through window
                if self.time - entered <= opt.inv_ride_through + 1e-9:
                    continue
                bt = params.breaker_time[f"gen:{m.id}"]
                if setname == "primary":
                    self.inv_pending.add(m.id)
                    self.pending.append(
                        (self.time + bt, "trip_machine", m.id))
                elif m.id not in self.shadow_gen_seen:
                    self.shadow_gen_seen.add(m.id)
                    self._shadow_record(Event(
                        self.time + bt, m.id, "generator trip"))

    def _check_collapse(self):
        for i in list(self.active_islands):
            if self.island_frequency(i) < self.opt.collapse_freq:
                self._collapse_island(i)
                return True
        return False

    # --- bookkeeping ------------------------------------------------------
    def _is_settled(self):
        if self.fault_bus is not None:
            return False
        for i in self.active_islands:
            f = self.island_frequency(i)
            for k, m in enumerate(self.machines):
                if self.m_on[k] and self.bus_island[m.bus] == i:
                    fi = self.opt.f0 * (1.0 + self.domega[k])
                    if abs(fi - f) > self.opt.settle_band_hz:
                        return False
        # magnitudes only: at off-nominal frequency the phasors rotate
        # in the synchronous reference frame even in steady state
        dv = np.max(np.abs(np.abs(self.v) - np.abs(self.v_prev))) \
            if self.nb else 0.0
        return dv <= self.opt.voltage_steady_tol

    def shed_mw(self):
        served = sum(self.snap.load_p[ld.id] * self.load_scale[ld.id]
                     for ld in self.case.loads)
        return max(0.0, self.snap.total_load - served)

    def _record_trace(self):
        row = {"t": self.time,
               "residual": self.max_residual}
        for i in self.active_islands:
            row[f"f_island{i}"] = self.island_frequency(i)
        for k, m in enumerate(self.machines):
            row[f"delta_{m.id}"] = float(self.delta[k])
            row[f"domega_{m.id}"] = float(self.domega[k])
        for b in self.case.buses:
            row[f"v_{b.id}"] = float(abs(self.v[self.idx[b.id]]))
        self.trace.append(row)


def _inverter_current(p_pu: float, v: complex) -> complex:
    """Constant-P injection with a current limit below 0.4 pu voltage."""
    vm = abs(v)
    if vm < 1e-4:
        return 0.0 + 0.0j
    imax = p_pu / 0.4
    i = np.conj(p_pu / v)
    if abs(i) > imax:
        i = i / abs(i) * imax
    return i
