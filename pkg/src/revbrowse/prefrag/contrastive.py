"""Sliding-window construction of (preference -> feature) contrastive samples."""

from __future__ import annotations

import logging
import random
import re
from collections import defaultdict
from dataclasses import asdict, dataclass

from ..extraction.records import ItemFeatures

logger = logging.getLogger(__name__)

LIKE_PROS = "LIKE_PROS"
DISLIKE_CONS = "DISLIKE_CONS"
BRANCHES = (LIKE_PROS, DISLIKE_CONS)

_PUNCT = re.compile(r"[^\w\s]")
_SPACE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _SPACE.sub(" ", _PUNCT.sub("", text.lower())).strip()


def join_phrases(phrases) -> str:
    return "; ".join(phrases)


@dataclass(frozen=True)
class ContrastiveSample:
    branch: str
    query_text: str
    positive_text: str
    negative_texts: tuple[str, ...]
    user_id: str = ""
    positive_review_id: str = ""
    negative_review_ids: tuple[str, ...] = ()
    window_start: int = 0

    def __post_init__(self):
        pos = normalize_text(self.positive_text)
        if any(normalize_text(n) == pos for n in self.negative_texts):
            raise ValueError("a negative duplicates the positive answer")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["negative_texts"] = list(self.negative_texts)
        rec["negative_review_ids"] = list(self.negative_review_ids)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ContrastiveSample":
        rec = dict(rec)
        rec["negative_texts"] = tuple(rec["negative_texts"])
        rec["negative_review_ids"] = tuple(rec.get("negative_review_ids", ()))
        return cls(**rec)


class FeatureStore:
    """Item features keyed by review, with per-item review lists for negatives.

    ``reviews`` supplies author, chronology and text for every review id; the
    windowing code reads prefix reviews from it.
    """

    def __init__(self, features, reviews):
        meta = {r.review_id: r for r in reviews}
        self.reviews = meta
        self.by_review: dict[str, ItemFeatures] = {}
        self._by_item = defaultdict(list)
        for f in features:
            if f is None or f.review_id not in meta:
                continue
            self.by_review[f.review_id] = f
            r = meta[f.review_id]
            self._by_item[f.item_id].append((r.timestamp, r.review_id, r.user_id))
        for entries in self._by_item.values():
            entries.sort()

    def __contains__(self, review_id):
        return review_id in self.by_review

    def __len__(self):
        return len(self.by_review)

    def get(self, review_id):
        return self.by_review.get(review_id)

    def item_reviews(self, item_id):
        """``(timestamp, review_id, user_id)`` tuples in chronological order."""
        return self._by_item.get(item_id, [])

    def items(self):
        return list(self._by_item)


def _side(features: ItemFeatures, branch: str):
    return features.pros if branch == LIKE_PROS else features.cons


def _query_side(prefs, branch: str):
    return prefs.like if branch == LIKE_PROS else prefs.dislike


class ContrastiveSet(list):
    """List of samples plus construction counters in ``stats``."""

    def __init__(self, samples=(), stats=None):
        super().__init__(samples)
        self.stats = stats or {}


def window_bounds(n: int, w: int, stride: int = 1) -> list[tuple[int, int]]:
    """``[start, end)`` spans of the windows over a sequence of length ``n``."""
    if n >= w:
        return [(s, s + w) for s in range(0, n - w + 1, stride)]
    if n >= 3:
        return [(0, n)]
    return []


def build_contrastive_set(
    sequences,
    feature_store: FeatureStore,
    preference_extractor,
    w: int = 20,
    m: int = 40,
    stride: int = 1,
    pad_negatives: bool = False,
    seed: int = 0,
    last_window_only: bool = False,
) -> ContrastiveSet:
    """Build samples from every window of every sequence.

    ``sequences`` are :class:`~revbrowse.corpus.InteractionSequence` objects
    (or anything with ``user_id`` and ``events``). For each window the query
    is built from preferences extracted over the first ``w - 1`` reviews via
    ``preference_extractor(reviews, user_id)``; the positive is the last
    review's features; negatives are other users' features for the same item,
    oldest first, skipping any whose normalized text equals the positive.
    Samples left with no negatives are dropped unless ``pad_negatives``, in
    which case features of other items fill the gap.
    """
    if w < 2:
        raise ValueError("w must be >= 2")
    if m < 1:
        raise ValueError("m must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rng = random.Random(seed)
    stats = defaultdict(int)
    samples = []
    pad_pool = None
    for seq in sequences:
        events = seq.events
        bounds = window_bounds(len(events), w, stride)
        if last_window_only:
            bounds = bounds[-1:]
        for start, end in bounds:
            stats["windows"] += 1
            last = events[end - 1]
            pos_feats = feature_store.get(last.review_id)
            if pos_feats is None:
                stats["skipped_missing_features"] += 1
                continue
            prefix = [feature_store.reviews[e.review_id] for e in events[start : end - 1]]
            prefs = preference_extractor(prefix, seq.user_id)
            if prefs is None:
                stats["skipped_empty_preferences"] += 1
                continue
            for branch in BRANCHES:
                query = _query_side(prefs, branch)
                positive = _side(pos_feats, branch)
                if not query or not positive:
                    continue
                positive_text = join_phrases(positive)
                key = normalize_text(positive_text)
                negs, neg_ids = [], []
                for _, rid, uid in feature_store.item_reviews(last.item_id):
                    if len(negs) >= m:
                        break
                    if uid == seq.user_id:
                        continue
                    side = _side(feature_store.get(rid), branch)
                    if not side:
                        continue
                    text = join_phrases(side)
                    if normalize_text(text) == key:
                        stats["negatives_deduplicated"] += 1
                        continue
                    negs.append(text)
                    neg_ids.append(rid)
                if len(negs) < m and pad_negatives:
                    if pad_pool is None:
                        pad_pool = sorted(feature_store.by_review.items())
                    candidates = [
                        (rid, join_phrases(_side(f, branch)))
                        for rid, f in pad_pool
                        if f.item_id != last.item_id and _side(f, branch)
                    ]
                    rng.shuffle(candidates)
                    for rid, text in candidates:
                        if len(negs) >= m:
                            break
                        if normalize_text(text) != key:
                            negs.append(text)
                            neg_ids.append(rid)
                if not negs:
                    stats["dropped_no_negatives"] += 1
                    continue
                samples.append(
                    ContrastiveSample(
                        branch,
                        join_phrases(query),
                        positive_text,
                        tuple(negs),
                        seq.user_id,
                        last.review_id,
                        tuple(neg_ids),
                        start,
                    )
                )
                stats["samples"] += 1
    if stats["skipped_missing_features"]:
        logger.info("%d windows skipped: positive review has no features", stats["skipped_missing_features"])
    return ContrastiveSet(samples, dict(stats))
