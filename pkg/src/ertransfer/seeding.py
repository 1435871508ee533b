"""Stage seeds derived from one master seed."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, stage: str) -> int:
    """Stable 63-bit seed keyed by stage name, so stages never share a random stream."""
    digest = hashlib.sha256(f"{int(master)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
