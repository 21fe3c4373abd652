"""First-stage candidate providers (stand-ins for a trained sequential retriever)."""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter

from .slate import MAX_SLATE

POPULARITY = "POPULARITY"
RECENCY = "RECENCY"
FILE = "FILE"
STRATEGIES = (POPULARITY, RECENCY, FILE)


class MissingUserError(KeyError):
    pass


def _user_rng(seed: int, user_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{user_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


def inject_ground_truth(item_ids, ground_truth, slate_size, seed=0, user_id=""):
    """Insert ``ground_truth`` at a seeded position unless already present.

    When the slate is full its last item makes room. Returns
    ``(item_ids, injected)``.
    """
    item_ids = list(item_ids)
    if ground_truth in item_ids:
        return item_ids, False
    if len(item_ids) >= slate_size:
        item_ids = item_ids[: slate_size - 1]
    pos = _user_rng(seed, user_id).randint(0, len(item_ids))
    item_ids.insert(pos, ground_truth)
    return item_ids, True


class CandidateProvider:
    """Produces per-user candidate item lists.

    ``interactions`` is an iterable of reviews (or events with ``item_id`` and
    ``timestamp``) used for popularity and recency statistics. For ``FILE``,
    ``slates`` maps user ids to item-id lists.
    """

    def __init__(self, strategy=POPULARITY, interactions=(), slates=None):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.slates = dict(slates or {})
        counts = Counter()
        latest = {}
        for r in interactions:
            counts[r.item_id] += 1
            latest[r.item_id] = max(latest.get(r.item_id, r.timestamp), r.timestamp)
        self._by_popularity = sorted(counts, key=lambda i: (-counts[i], i))
        self._by_recency = sorted(latest, key=lambda i: (-latest[i], i))

    @classmethod
    def from_file(cls, path):
        slates = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    slates[str(rec["user_id"])] = [str(i) for i in rec["item_ids"]]
        return cls(FILE, slates=slates)

    def provide(self, user_id, history=(), slate_size=20):
        if not 2 <= slate_size <= MAX_SLATE:
            raise ValueError(f"slate_size must be in 2..{MAX_SLATE}")
        if self.strategy == FILE:
            if user_id not in self.slates:
                raise MissingUserError(user_id)
            return list(self.slates[user_id])
        if self.strategy == POPULARITY:
            seen = set(history)
            ranked = (i for i in self._by_popularity if i not in seen)
        else:
            ranked = iter(self._by_recency)
        out = []
        for item in ranked:
            if len(out) == slate_size:
                break
            out.append(item)
        return out


def provide_candidates(provider: CandidateProvider, user_id, history=(), slate_size=20):
    return provider.provide(user_id, history, slate_size)
