"""Protection-system parameters and their probability models.

Circuit breaker opening times are uniform on [70, 90] ms; distance-relay
impedance measurement has a 10% accuracy, modelled as a reach multiplier
uniform on [0.90, 1.10]; relay pickup delays are uniform on [0, 10] ms.
"slowest" / "fastest" draw modes set every parameter to the pdf extreme
that delays / hastens protection operation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grid import NetworkCase
from .rng import stream

BREAKER_TIME_RANGE = (0.070, 0.090)
Z_MULT_RANGE = (0.90, 1.10)
PICKUP_DELAY_RANGE = (0.000, 0.010)
UFLS_STAGE_COUNT = 4


def relay_ids(case: NetworkCase) -> list:
    out = []
    for br in case.branches:
        out.append(f"{br.id}:{br.from_bus}")
        out.append(f"{br.id}:{br.to_bus}")
    return out


def breaker_ids(case: NetworkCase) -> list:
    out = list(relay_ids(case))
    out += [f"gen:{m.id}" for m in case.machines]
    out += [f"ufls:{s}" for s in range(1, UFLS_STAGE_COUNT + 1)]
    return out


@dataclass(frozen=True)
class ProtectionParamSet:
    mode: str                 # nominal | slowest | fastest | random
    breaker_time: dict        # breaker id -> s
    z_mult: dict              # relay id -> reach multiplier
    pickup_delay: dict        # relay id -> s


def sample_protection_params(case: NetworkCase, mode: str,
                             seed: int = 0, *seed_key) -> ProtectionParamSet:
    """Draw a parameter set; random mode draws each parameter independently
    uniform over its interval, keyed by (seed, *seed_key, device)."""
    relays = relay_ids(case)
    breakers = breaker_ids(case)
    if mode == "nominal":
        bt = {b: 0.080 for b in breakers}
        zm = {r: 1.00 for r in relays}
        pd = {r: 0.005 for r in relays}
    elif mode == "slowest":
        bt = {b: BREAKER_TIME_RANGE[1] for b in breakers}
        zm = {r: Z_MULT_RANGE[0] for r in relays}
        pd = {r: PICKUP_DELAY_RANGE[1] for r in relays}
    elif mode == "fastest":
        bt = {b: BREAKER_TIME_RANGE[0] for b in breakers}
        zm = {r: Z_MULT_RANGE[1] for r in relays}
        pd = {r: PICKUP_DELAY_RANGE[0] for r in relays}
    elif mode == "random":
        bt = {}
        zm = {}
        pd = {}
        for b in breakers:
            rng = stream(seed, "prot", *seed_key, "bt", b)
            bt[b] = float(rng.uniform(*BREAKER_TIME_RANGE))
        for r in relays:
            rng = stream(seed, "prot", *seed_key, "zm", r)
            zm[r] = float(rng.uniform(*Z_MULT_RANGE))
            rng = stream(seed, "prot", *seed_key, "pd", r)
            pd[r] = float(rng.uniform(*PICKUP_DELAY_RANGE))
    else:
        raise ValueError(f"unknown draw mode {mode}")
    return ProtectionParamSet(mode=mode, breaker_time=bt, z_mult=zm,
                              pickup_delay=pd)
