"""Named counter-based random streams.

Every random draw in the package flows from a single master seed through a
stream keyed by a tuple of names/indices (e.g. ``("oc", contingency_id, k)``).
Streams are independent Philox generators, so results do not depend on worker
count or scheduling order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(master_seed: int, *key) -> np.random.Generator:
    """Return a Generator for the stream identified by (master_seed, *key).

    Key parts may be strings or integers; the same parts always yield the
    same stream.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for part in key:
        h.update(b"\x00")
        h.update(str(part).encode())
    k = int.from_bytes(h.digest()[:16], "little")
    return np.random.Generator(np.random.Philox(key=k))
