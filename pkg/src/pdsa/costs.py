"""Consequence cost model.

Load shed is translated into societal cost through a linear-restoration
model: restoration of P_shed megawatts takes a time proportional to the shed
fraction of the snapshot load, so energy not served is

    ENS = P_shed * T_rest / 2,   T_rest = T_FULL * (P_shed / P_total)

and cost = VOLL * ENS, quadratic (hence convex) in the shed fraction. The
model is calibrated so that a complete blackout at 4350 MW load costs 500 M EUR,
which sets VOLL * T_FULL; a complete blackout of any snapshot costs
BLACKOUT_EUR_PER_MW * P_total.
"""

from __future__ import annotations

BLACKOUT_COST_EUR = 500.0e6
BLACKOUT_REF_LOAD_MW = 4350.0
BLACKOUT_EUR_PER_MW = BLACKOUT_COST_EUR / BLACKOUT_REF_LOAD_MW
VOLL_EUR_PER_MWH = 10_000.0
# ENS at full blackout is BLACKOUT_COST / VOLL, hence:
T_FULL_RESTORATION_H = 2.0 * BLACKOUT_COST_EUR / (
    VOLL_EUR_PER_MWH * BLACKOUT_REF_LOAD_MW)


def consequences_cost(shed_mw: float, total_load_mw: float) -> float:
    """Cost in EUR of shedding ``shed_mw`` out of ``total_load_mw``."""
    if shed_mw < 0 or shed_mw > total_load_mw * (1 + 1e-9):
        raise ValueError(f"shed {shed_mw} MW outside [0, {total_load_mw}]")
    if total_load_mw <= 0:
        return 0.0
    shed_mw = min(shed_mw, total_load_mw)
    return BLACKOUT_EUR_PER_MW * shed_mw * shed_mw / total_load_mw


def energy_not_served_mwh(shed_mw: float, total_load_mw: float) -> float:
    if total_load_mw <= 0:
        return 0.0
    t_rest = T_FULL_RESTORATION_H * shed_mw / total_load_mw
    return shed_mw * t_rest / 2.0
