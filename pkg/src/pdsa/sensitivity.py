"""Detection of scenarios whose cascade path depends on protection-
parameter uncertainty.

A single dual-set simulation runs the slowest-possible protection
parameters against the breakers while a fastest-possible shadow set
observes the same trajectory and records when it *would* have tripped.
If the two event sequences differ in content (new-event) or could differ
in order (order-swap), the scenario is declared sensitive and its
consequences are re-estimated by a small nested Monte Carlo over random
protection parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .protection import sample_protection_params
from .simulator import ScenarioResult, SimOptions, simulate

K_DEFAULT = 5


@dataclass(frozen=True)
class SensitivityVerdict:
    sensitive: bool
    reason: str                    # order-swap | new-event | none
    slow_events: tuple
    fast_events: tuple
    slow_result: ScenarioResult

    def __post_init__(self):
        if self.sensitive != (self.reason != "none"):
            raise ValueError("sensitive flag inconsistent with reason")


def sequences_sensitive(slow, fast) -> tuple[bool, str]:
    """Compare slow-set and fast-set event sequences from one scenario.

    new-event: the sets of (device, kind) events differ.
    order-swap: some pair (a, b) with a before b in the slow sequence has
    crossing intervals — the fast time of b is at or before the slow time
    of a, so the order could reverse for intermediate parameters.
    """
    slow_keys = {e.key() for e in slow}
    fast_keys = {e.key() for e in fast}
    if slow_keys != fast_keys:
        return True, "new-event"
    slow_t = {}
    fast_t = {}
    for e in slow:
        slow_t.setdefault(e.key(), e.time)
    for e in fast:
        fast_t.setdefault(e.key(), e.time)
    ordered = sorted(slow_t, key=lambda k: slow_t[k])
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if slow_t[a] < slow_t[b] and fast_t[b] <= slow_t[a]:
                return True, "order-swap"
    return False, "none"


def dual_run(case, snapshot, contingency,
             options: SimOptions | None = None) -> SensitivityVerdict:
    """One simulation with acting-slowest and shadow-fastest parameter
    sets; classify the resulting pair of event sequences."""
    slow = sample_protection_params(case, "slowest")
    fast = sample_protection_params(case, "fastest")
    result = simulate(case, snapshot, contingency, params=slow,
                      options=options, shadow_params=fast)
    slow_events = result.events
    fast_events = result.shadow_events or ()
    sensitive, reason = sequences_sensitive(slow_events, fast_events)
    return SensitivityVerdict(sensitive=sensitive, reason=reason,
                              slow_events=slow_events,
                              fast_events=fast_events,
                              slow_result=result)


def conditional_mc(case, snapshot, contingency, seed: int, sample_index:
                   int, k: int = K_DEFAULT,
                   options: SimOptions | None = None):
    """K simulations with independently drawn random protection
    parameters; returns the list of costs (EUR)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    costs = []
    for j in range(k):
        params = sample_protection_params(
            case, "random", seed, contingency.id, sample_index, j)
        res = simulate(case, snapshot, contingency, params=params,
                       options=options)
        costs.append(res.cost_eur)
    return costs
