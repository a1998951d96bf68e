"""Deterministic random substreams derived from a 64-bit master seed.

Every stochastic step in the toolkit draws from a substream keyed by a
label tuple such as ``(platform, part, config, unitary, purpose)``.  Equal
(seed, key) pairs yield identical streams on any machine; distinct keys
yield statistically independent streams.  This is what makes two isolated
platform processes reproduce byte-identical ensembles and shot records.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _feed(h, part) -> None:
    # Length- and type-prefixed encoding so ("ab",) and ("a","b") differ.
    if isinstance(part, bool):
        h.update(b"b" + bytes([part]))
    elif isinstance(part, (int, np.integer)):
        h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
    elif isinstance(part, str):
        raw = part.encode()
        h.update(b"s" + len(raw).to_bytes(4, "little") + raw)
    elif isinstance(part, (tuple, list)):
        h.update(b"t" + len(part).to_bytes(4, "little"))
        for item in part:
            _feed(h, item)
    elif part is None:
        h.update(b"n")
    else:
        raise TypeError(f"unsupported substream key component: {part!r}")


def substream(master_seed: int, *key) -> np.random.Generator:
    """Return an independent generator for (master_seed, key)."""
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(8, "little", signed=False))
    for part in key:
        _feed(h, part)
    words = np.frombuffer(h.digest(), dtype=np.uint32)
    return np.random.default_rng(np.random.SeedSequence(words.tolist()))


def key_digest(master_seed: int, *key) -> str:
    """Short hex digest identifying a substream; used in reports."""
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(8, "little", signed=False))
    for part in key:
        _feed(h, part)
    return h.hexdigest()[:16]


def derive_seed(master_seed: int, *key) -> int:
    """A 63-bit seed deterministically derived from (master_seed, key)."""
    h = hashlib.sha256()
    h.update(int(master_seed).to_bytes(8, "little", signed=False))
    for part in key:
        _feed(h, part)
    return int.from_bytes(h.digest()[:8], "little") >> 1
