"""Contingency list with physical occurrence frequencies.

Initiating events are three-phase faults at one end of a line. Two clearing
modes are considered, both at 200 ms:

- delayed N-1: the primary protection fails (probability 0.1), backup clears
  by opening the faulted line;
- breaker failure N-2: one breaker fails to open (probability 0.01), backup
  clears by additionally opening a single adjacent line.

Normal-clearing N-1 faults are excluded (always secure by design criterion).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .grid import NetworkCase

DELAYED_CLEARING_PROB = 0.1
BREAKER_FAILURE_PROB = 0.01
CLEARING_TIME_S = 0.200


@dataclass(frozen=True)
class Contingency:
    id: str
    branch: str              # faulted branch
    fault_bus: str           # fault end
    mode: str                # "delayed-n1" | "breaker-failure-n2"
    second_branch: str | None
    frequency: float         # events / year

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError(f"{self.id}: frequency must be positive")
        if (self.mode == "breaker-failure-n2") != (
                self.second_branch is not None):
            raise ValueError(f"{self.id}: N-2 requires a second branch")


def enumerate_contingencies(case: NetworkCase) -> list:
    """All delayed-N1 and breaker-failure-N2 contingencies with f_i."""
    topo = case.base_topology()
    rate = case.fault_rate_per_100km_year / 100.0
    out = []
    in_service = [br for br in case.branches if br.id in topo.branches]
    for br in in_service:
        fault_freq = rate * br.length_km   # faults/year on this line
        if fault_freq <= 0.0:
            continue   # transformers (length 0) are not faulted
        for end in (br.from_bus, br.to_bus):
            per_end = fault_freq / 2.0
            out.append(Contingency(
                id=f"{br.id}@{end}:delayed",
                branch=br.id, fault_bus=end, mode="delayed-n1",
                second_branch=None,
                frequency=per_end * DELAYED_CLEARING_PROB))
            adjacent = sorted(
                b.id for b in in_service
                if b.id != br.id and end in (b.from_bus, b.to_bus))
            for adj in adjacent:
                out.append(Contingency(
                    id=f"{br.id}@{end}+{adj}:bf",
                    branch=br.id, fault_bus=end, mode="breaker-failure-n2",
                    second_branch=adj,
                    frequency=per_end * BREAKER_FAILURE_PROB
                    / len(adjacent)))
    return out


def contingencies_csv(contingencies) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["id", "branch", "fault_bus", "mode", "second_branch",
                "frequency_per_year"])
    for c in contingencies:
        w.writerow([c.id, c.branch, c.fault_bus, c.mode,
                    c.second_branch or "", repr(c.frequency)])
    return buf.getvalue()
