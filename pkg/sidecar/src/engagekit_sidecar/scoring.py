"""Deterministic stub scoring.

Stub mode answers every request with a probability vector derived from a
seeded hash of (request_id, clip digest): the same request always gets the
same answer, across processes and machines, with no model assets involved.
"""

from __future__ import annotations

import hashlib
import json
import random


def dictionary_sha256(names: tuple[str, ...]) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


def clip_digest(clip: dict) -> str:
    canonical = json.dumps(clip, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def stub_scores(request_id: str, digest: str, n_classes: int) -> list[float]:
    seed = hashlib.sha256(f"{request_id}:{digest}".encode("utf-8")).hexdigest()
    rng = random.Random(seed)
    raw = [rng.random() for _ in range(n_classes)]
    total = sum(raw)
    return [x / total for x in raw]


def argmax_lowest_tie(scores: list[float]) -> int:
    return max(range(len(scores)), key=lambda i: (scores[i], -i))
