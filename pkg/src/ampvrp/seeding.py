"""Deterministic named random streams.

Every random choice in the solver flows from one root seed.  Components ask
for a stream under a stable name path (for example ``("rccw", round, start)``)
and get an independent, platform-stable generator.
"""

from __future__ import annotations

import hashlib
import random


def stream_seed(root_seed: int, *names) -> int:
    """Stable 64-bit seed for a named substream of the root seed."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest()[:8], "big")


def stream(root_seed: int, *names) -> random.Random:
    """Independent generator for the given name path."""
    return random.Random(stream_seed(root_seed, *names))
