"""Fast security screening of (snapshot, contingency) scenarios.

Three indicators classify a scenario before any time-domain simulation:

* angle stability — critical clearing time from an extended equal-area
  reduction: machines are ranked by initial acceleration under the fault,
  each prefix of the ranking is tested as a candidate critical cluster,
  the cluster and the remaining machines are aggregated into a
  one-machine equivalent, and the equal-area criterion on fitted
  sinusoidal power curves gives the critical angle; the CCT is the time
  for the fault-on equivalent to reach it;
* voltage strength — post-contingency short-circuit power at every
  loaded bus must exceed a multiple of the load's apparent power;
* frequency — the initial rate of change of frequency from generation
  lost to the contingency (including inverter plants whose during-fault
  voltage dips below their ride-through limit), and the lost generation
  as a fraction of the committed primary reserve.

A scenario is secure only if all three pass. A margin (default +50 ms)
is added to the actual clearing time before comparing against the CCT,
compensating possible CCT over-estimation by the reduction; larger
margins flag more scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contingencies import CLEARING_TIME_S, Contingency
from .dispatch import Snapshot
from .grid import FAULT_ADMITTANCE, NetworkCase, Topology
from .powerflow import PowerFlowError, solve_initial_state

CCT_CAP_S = 5.0


@dataclass(frozen=True)
class ScreeningThresholds:
    clearing_time_s: float = CLEARING_TIME_S
    cct_margin_s: float = 0.050
    rocof_limit_hz_s: float = 0.4
    lost_gen_reserve_fraction: float = 0.7
    voltage_sc_ratio: float = 4.0
    inv_uv_pu: float = 0.50
    inv_ride_through_s: float = 0.150
    f0: float = 50.0


@dataclass(frozen=True)
class ScreeningVerdict:
    secure: bool
    angle_secure: bool
    voltage_secure: bool
    frequency_secure: bool
    cct_s: float
    voltage_ratio: float           # min S_sc / S_load over loaded buses
    rocof_hz_s: float
    lost_gen_fraction: float       # of committed primary reserve
    cct_margin_s: float

    def __post_init__(self):
        if self.secure != (self.angle_secure and self.voltage_secure
                           and self.frequency_secure):
            raise ValueError("secure flag inconsistent with indicators")
        if self.cct_s < 0.0:
            raise ValueError("CCT must be >= 0")


class _ClassicalModel:
    """Machine internal-node reduction of a snapshot: loads (and inverter
    plants, as negative loads) converted to constant admittances at their
    power-flow voltages, network reduced onto the internal e.m.f. nodes."""

    def __init__(self, case: NetworkCase, snapshot: Snapshot,
                 topo: Topology):
        self.case = case
        self.base = case.base_mva
        idx = case.bus_index()
        self.idx = idx
        nb = len(case.buses)
        v0, _, msq = solve_initial_state(case, topo, snapshot)
        self.v0 = v0

        self.machines = [m for m in case.sync_machines() if m.id in msq]
        self.e = np.zeros(len(self.machines), dtype=complex)
        self.pm = np.zeros(len(self.machines))
        self.m_inertia = np.zeros(len(self.machines))
        self.h_s = np.zeros(len(self.machines))
        self.s_pu = np.zeros(len(self.machines))
        for k, m in enumerate(self.machines):
            p, q = msq[m.id]
            v = v0[idx[m.bus]]
            i = np.conj(complex(p, q) / v)
            self.e[k] = v + 1j * m.xd_t * i
            self.pm[k] = p
            self.s_pu[k] = m.p_max / case.base_mva
            self.m_inertia[k] = 2.0 * m.h * self.s_pu[k]
            self.h_s[k] = m.h

        # shunt loads: consumption loads plus inverters as negative loads
        self.shunts = np.zeros(nb, dtype=complex)
        for ld in case.loads:
            s = complex(snapshot.load_p[ld.id],
                        snapshot.load_q[ld.id]) / self.base
            self.shunts[idx[ld.bus]] += np.conj(s) / abs(
                v0[idx[ld.bus]]) ** 2
        self.inverter_p = {}
        for m in case.machines:
            if m.type != "inverter" or m.id not in topo.machines:
                continue
            p = snapshot.dispatch.get(m.id, 0.0) / self.base
            self.inverter_p[m.id] = p
            if p != 0.0:
                s = complex(-p, 0.0)
                self.shunts[idx[m.bus]] += np.conj(s) / abs(
                    v0[idx[m.bus]]) ** 2

    def bus_matrix(self, branch_ids, fault_bus=None):
        idx = self.idx
        nb = len(self.case.buses)
        y = np.zeros((nb, nb), dtype=complex)
        for br in self.case.branches:
            if br.id not in branch_ids:
                continue
            i, j = idx[br.from_bus], idx[br.to_bus]
            ys = 1.0 / complex(br.r, br.x)
            ysh = 0.5j * br.b
            y[i, i] += ys + ysh
            y[j, j] += ys + ysh
            y[i, j] -= ys
            y[j, i] -= ys
        y[np.diag_indices(nb)] += self.shunts
        # small regularizing shunt keeps split-off load pockets invertible
        y[np.diag_indices(nb)] += 1e-9
        if fault_bus is not None:
            y[idx[fault_bus], idx[fault_bus]] += FAULT_ADMITTANCE
        return y

    def reduced_matrix(self, branch_ids, fault_bus=None):
        """Kron reduction onto the machine internal nodes."""
        nm = len(self.machines)
        nb = len(self.case.buses)
        y = np.zeros((nb + nm, nb + nm), dtype=complex)
        y[:nb, :nb] = self.bus_matrix(branch_ids, fault_bus)
        for k, m in enumerate(self.machines):
            b = self.idx[m.bus]
            yg = 1.0 / complex(0.0, m.xd_t)
            g = nb + k
            y[g, g] += yg
            y[b, b] += yg
            y[g, b] -= yg
            y[b, g] -= yg
        ybb = y[:nb, :nb]
        ybg = y[:nb, nb:]
        ygb = y[nb:, :nb]
        ygg = y[nb:, nb:]
        return ygg - ygb @ np.linalg.solve(ybb, ybg)

    def electrical_power(self, yred, delta):
        e = np.abs(self.e) * np.exp(1j * delta)
        i = yred @ e
        return (e * np.conj(i)).real

    def fault_voltages(self, branch_ids, fault_bus):
        """During-fault bus voltages with machines as internal sources."""
        y = self.bus_matrix(branch_ids, fault_bus)
        inj = np.zeros(len(self.case.buses), dtype=complex)
        for k, m in enumerate(self.machines):
            yg = 1.0 / complex(0.0, m.xd_t)
            b = self.idx[m.bus]
            y[b, b] += yg
            inj[b] += self.e[k] * yg
        return np.linalg.solve(y, inj)


def _fit_sinusoid(model, yred, delta0, direction):
    """Fit P(u) for group displacement u as A + B sin(d) + C cos(d) with
    d = u, sampling u in {0, pi/2, pi} along ``direction``."""
    samples = []
    for u in (0.0, 0.5 * math.pi, math.pi):
        p = model.electrical_power(yred, delta0 + u * direction)
        samples.append(p)
    return samples


def _omib_curve(p_samples, weights):
    """Fit a + b sin(u) + c cos(u) through P(0), P(pi/2), P(pi)."""
    p0, p1, p2 = (float(weights @ p) for p in p_samples)
    # u=0: a + c = p0 ; u=pi/2: a + b = p1 ; u=pi: a - c = p2
    a = 0.5 * (p0 + p2)
    c = 0.5 * (p0 - p2)
    b = p1 - a
    return a, b, c


def _area(a, b, c, pm, u1, u2):
    """Integral of (pm - (a + b sin u + c cos u)) du over [u1, u2]."""
    def anti(u):
        return (pm - a) * u + b * math.cos(u) - c * math.sin(u)
    return anti(u2) - anti(u1)


def eea_cct(case: NetworkCase, snapshot: Snapshot,
            contingency: Contingency,
            thresholds: ScreeningThresholds | None = None,
            topo: Topology | None = None) -> float:
    """Critical clearing time (s) for a fault at the contingency's bus
    with the contingency's branches disconnected at clearing.

    Returns ``CCT_CAP_S`` when no candidate cluster can lose synchronism
    and 0.0 when the post-fault equivalent has no equilibrium.
    """
    topo = topo or case.base_topology()
    try:
        model = _ClassicalModel(case, snapshot, topo)
    except PowerFlowError:
        return 0.0
    nm = len(model.machines)
    if nm < 2:
        return CCT_CAP_S

    pre_branches = set(topo.branches)
    opened = {contingency.branch}
    if contingency.second_branch:
        opened.add(contingency.second_branch)
    post_branches = pre_branches - opened
    try:
        y_fault = model.reduced_matrix(pre_branches, contingency.fault_bus)
        y_post = model.reduced_matrix(post_branches)
    except np.linalg.LinAlgError:
        return 0.0

    delta0 = np.angle(model.e)
    pm = model.pm
    minert = model.m_inertia
    p_fault0 = model.electrical_power(y_fault, delta0)
    acc0 = (pm - p_fault0) / minert
    order = sorted(range(nm), key=lambda k: (-acc0[k],
                                             model.machines[k].id))

    best = CCT_CAP_S
    for size in range(1, nm):
        cluster = order[:size]
        rest = order[size:]
        m_s = minert[cluster].sum()
        m_a = minert[rest].sum()
        m_t = m_s + m_a
        m_eq = m_s * m_a / m_t
        # displacement direction preserving the center of inertia while
        # advancing the cluster by u relative to the rest
        direction = np.zeros(nm)
        direction[cluster] = m_a / m_t
        direction[rest] = -m_s / m_t
        weights = np.zeros(nm)
        weights[cluster] = m_a / m_t
        weights[rest] = -m_s / m_t
        pm_omib = float(weights @ pm)

        f_samples = _fit_sinusoid(model, y_fault, delta0, direction)
        p_samples = _fit_sinusoid(model, y_post, delta0, direction)
        af, bf, cf = _omib_curve(f_samples, weights)
        ap, bp, cp = _omib_curve(p_samples, weights)

        cct = _cluster_cct(af, bf, cf, ap, bp, cp, pm_omib, m_eq)
        best = min(best, cct)
        if best == 0.0:
            break
    return best


def _cluster_cct(af, bf, cf, ap, bp, cp, pm, m_eq,
                 omega_s=2.0 * math.pi * 50.0):
    """Equal-area CCT for one one-machine-equivalent, u measured from the
    pre-fault operating point (u = 0)."""
    # accelerating at the moment of fault application?
    pa0 = pm - (af + cf)        # fault-on power at u = 0
    if pa0 <= 1e-9:
        return CCT_CAP_S
    # post-fault equilibria: pm = ap + k sin(u + phi)
    k = math.hypot(bp, cp)
    if k < 1e-12 or abs(pm - ap) > k:
        return 0.0              # no post-fault equilibrium
    theta = math.asin((pm - ap) / k)
    phi = math.atan2(cp, bp)
    u_unstable = math.pi - theta - phi
    while u_unstable <= 1e-9:
        u_unstable += 2.0 * math.pi

    def balance(uc):
        acc = _area(af, bf, cf, pm, 0.0, uc)
        dec = -_area(ap, bp, cp, pm, uc, u_unstable)
        return acc - dec

    if balance(u_unstable) <= 0.0:
        return CCT_CAP_S        # all fault-on energy absorbable
    if balance(0.0) >= 0.0:
        return 0.0
    lo, hi = 0.0, u_unstable
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if balance(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    u_crit = 0.5 * (lo + hi)

    # time for the fault-on equivalent to swing from 0 to u_crit
    u, w = 0.0, 0.0
    dt = 1e-3
    t = 0.0
    while t < CCT_CAP_S:
        def deriv(u_, w_):
            return omega_s * w_, (pm - (af + bf * math.sin(u_)
                                        + cf * math.cos(u_))) / m_eq
        du1, dw1 = deriv(u, w)
        du2, dw2 = deriv(u + dt * du1, w + dt * dw1)
        u_next = u + 0.5 * dt * (du1 + du2)
        w_next = w + 0.5 * dt * (dw1 + dw2)
        if u_next >= u_crit:
            frac = (u_crit - u) / max(u_next - u, 1e-15)
            return t + frac * dt
        if w_next < 0.0 and u_next <= u:
            return CCT_CAP_S    # swing turned back before the boundary
        u, w = u_next, w_next
        t += dt
    return CCT_CAP_S


def screen(case: NetworkCase, snapshot: Snapshot,
           contingency: Contingency | None,
           thresholds: ScreeningThresholds | None = None,
           topo: Topology | None = None) -> ScreeningVerdict:
    """Classify a scenario secure/unsecure with the three indicators."""
    th = thresholds or ScreeningThresholds()
    topo = topo or case.base_topology()
    if contingency is None:
        return ScreeningVerdict(
            secure=True, angle_secure=True, voltage_secure=True,
            frequency_secure=True, cct_s=CCT_CAP_S,
            voltage_ratio=math.inf, rocof_hz_s=0.0,
            lost_gen_fraction=0.0, cct_margin_s=th.cct_margin_s)

    cct = eea_cct(case, snapshot, contingency, th, topo=topo)
    angle_secure = cct >= th.clearing_time_s + th.cct_margin_s

    opened = {contingency.branch}
    if contingency.second_branch:
        opened.add(contingency.second_branch)
    post_topo = topo.without_branches(*opened)

    voltage_ratio = _voltage_ratio(case, snapshot, post_topo)
    voltage_secure = voltage_ratio >= th.voltage_sc_ratio

    rocof, lost_fraction = _frequency_indicator(
        case, snapshot, contingency, th, topo, post_topo)
    frequency_secure = (rocof <= th.rocof_limit_hz_s
                        and lost_fraction <= th.lost_gen_reserve_fraction)

    return ScreeningVerdict(
        secure=angle_secure and voltage_secure and frequency_secure,
        angle_secure=angle_secure, voltage_secure=voltage_secure,
        frequency_secure=frequency_secure, cct_s=cct,
        voltage_ratio=voltage_ratio, rocof_hz_s=rocof,
        lost_gen_fraction=lost_fraction, cct_margin_s=th.cct_margin_s)


def _voltage_ratio(case, snapshot, post_topo):
    """min over loaded buses of S_sc / S_load on the post-contingency
    subtransient network."""
    from .grid import thevenin_impedance
    ratio = math.inf
    for ld in case.loads:
        s_load = math.hypot(snapshot.load_p[ld.id],
                            snapshot.load_q[ld.id])
        if s_load <= 1e-9:
            continue
        z = abs(thevenin_impedance(case, post_topo, ld.bus,
                                   mode="subtransient"))
        if not math.isfinite(z) or z <= 0.0:
            return 0.0
        s_sc = case.base_mva / z
        ratio = min(ratio, s_sc / s_load)
    return ratio


def _frequency_indicator(case, snapshot, contingency, th, topo, post_topo):
    """(initial RoCoF Hz/s, lost generation / committed reserve).

    Lost generation counts units disconnected by the contingency's branch
    openings (machines islanded away from the bulk of the inertia) plus
    inverter plants whose during-fault voltage sags below the
    ride-through threshold (a 200 ms fault exceeds their 150 ms limit).
    """
    from .grid import connected_islands

    model = _ClassicalModel(case, snapshot, topo)
    idx = case.bus_index()
    lost_mw = 0.0
    counted = set()

    vf = model.fault_voltages(set(topo.branches), contingency.fault_bus)
    if th.clearing_time_s > th.inv_ride_through_s:
        for m in case.machines:
            if m.type != "inverter" or m.id not in topo.machines:
                continue
            p = snapshot.dispatch.get(m.id, 0.0)
            if p > 0.0 and abs(vf[idx[m.bus]]) < th.inv_uv_pu:
                lost_mw += p
                counted.add(m.id)

    islands = connected_islands(case, post_topo)
    inertia_by_island = []
    for isl in islands:
        h_s = sum(m.h * m.p_max for m in model.machines if m.bus in isl)
        inertia_by_island.append(h_s)
    if inertia_by_island:
        main = int(np.argmax(inertia_by_island))
        for i, isl in enumerate(islands):
            if i == main:
                continue
            for m in case.machines:
                if (m.bus in isl and m.id in topo.machines
                        and m.id not in counted):
                    lost_mw += snapshot.dispatch.get(m.id, 0.0)
                    counted.add(m.id)

    h_total = sum(m.h * m.p_max for m in model.machines) or 1e-9
    rocof = lost_mw * th.f0 / (2.0 * h_total)
    reserve = snapshot.total_reserve
    lost_fraction = lost_mw / reserve if reserve > 0 else (
        math.inf if lost_mw > 0 else 0.0)
    return rocof, lost_fraction
