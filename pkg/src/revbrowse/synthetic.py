"""Seeded synthetic review corpus with a learnable preference/feature structure.

Every user likes a few aspects and dislikes a couple of others; every item
has strengths and weaknesses drawn from the same aspect set. Users pick items
whose strengths overlap their likes, and each review mentions exactly the
overlapping aspects (praised) and any disliked weaknesses (criticized), using
the aspect terms understood by :mod:`revbrowse.extraction.mock`. The mock
extractor phrases preferences and features in disjoint vocabularies, so a
retriever has to learn the correspondence.
"""

from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path

import numpy as np

from .corpus import ItemMeta, Review
from .extraction.mock import ASPECTS

_ADJECTIVES = ["Classic", "Deluxe", "Mini", "Ultra", "Family", "Pocket", "Royal", "Rapid"]
_NOUNS = ["Snack Box", "Adventure", "Controller", "Jacket", "Sampler", "Quest", "Backpack", "Tea Tin"]


def _review_text(praised, criticized, rng):
    if praised and not criticized:
        parts = [f"Loved how {t} it is." if rng.random() < 0.5 else f"Great {t} overall." for t in praised]
        return 5 if rng.random() < 0.7 else 4, " ".join(parts)
    if criticized and not praised:
        parts = [f"Too {t} for me." if rng.random() < 0.5 else f"The {t} part was bad." for t in criticized]
        return 1 if rng.random() < 0.5 else 2, " ".join(parts)
    if praised and criticized:
        good = " and ".join(praised)
        bad = " and ".join(criticized)
        return 3, f"I loved the {good} side, but the {bad} was terrible."
    return 3, "It arrived and it works as described."


def make_synthetic_corpus(
    n_users: int = 200,
    n_items: int = 60,
    n_likes: int = 3,
    n_dislikes: int = 2,
    n_strengths: int = 3,
    n_weaknesses: int = 2,
    long_fraction: float = 0.3,
    affinity: float = 2.5,
    seed: int = 0,
):
    """Return ``(reviews, items)`` for a seeded synthetic corpus."""
    rng = np.random.default_rng(seed)
    aspects = list(ASPECTS)
    n_aspects = len(aspects)

    strengths, weaknesses = [], []
    for _ in range(n_items):
        perm = rng.permutation(n_aspects)
        strengths.append(set(perm[:n_strengths].tolist()))
        weaknesses.append(set(perm[n_strengths : n_strengths + n_weaknesses].tolist()))
    items = [
        ItemMeta(f"I{k:04d}", f"{_ADJECTIVES[k % len(_ADJECTIVES)]} {_NOUNS[(k // len(_ADJECTIVES)) % len(_NOUNS)]} {k}")
        for k in range(n_items)
    ]

    reviews = []
    base_time = 1_300_000_000
    rid = 0
    for u in range(n_users):
        perm = rng.permutation(n_aspects)
        likes = set(perm[:n_likes].tolist())
        dislikes = set(perm[n_likes : n_likes + n_dislikes].tolist())
        if rng.random() < long_fraction:
            length = int(rng.integers(20, 31))
        else:
            length = int(rng.integers(6, 16))
        affinity_scores = np.array(
            [len(likes & strengths[k]) - 0.5 * len(dislikes & weaknesses[k]) for k in range(n_items)], dtype=float
        )
        weights = np.exp(affinity * affinity_scores)
        chosen = rng.choice(n_items, size=min(length, n_items), replace=False, p=weights / weights.sum())
        t = base_time + int(rng.integers(0, 86_400 * 30))
        for k in chosen:
            praised = [aspects[a] for a in sorted(likes & strengths[k])]
            criticized = [aspects[a] for a in sorted(dislikes & weaknesses[k])]
            rating, text = _review_text(praised, criticized, rng)
            t += int(rng.integers(3_600, 86_400 * 7))
            reviews.append(
                Review(
                    review_id=f"R{rid:06d}",
                    user_id=f"U{u:04d}",
                    item_id=items[k].item_id,
                    rating=rating,
                    text=text,
                    timestamp=t,
                    summary="",
                    helpful_votes=int(rng.integers(0, 5)),
                )
            )
            rid += 1
    return reviews, items


def to_amazon_lines(reviews, items):
    """Render as Amazon-2014 style review lines followed by metadata lines."""
    lines = []
    for r in reviews:
        lines.append(
            json.dumps(
                {
                    "reviewerID": r.user_id,
                    "asin": r.item_id,
                    "reviewText": r.text,
                    "summary": r.summary,
                    "overall": float(r.rating),
                    "unixReviewTime": r.timestamp,
                    "helpful": [r.helpful_votes, r.helpful_votes],
                    "reviewID": r.review_id,
                },
                sort_keys=True,
            )
        )
    for m in items:
        lines.append(json.dumps({"asin": m.item_id, "title": m.title}, sort_keys=True))
    return lines


def fixture_path(*parts) -> Path:
    """Path of a file shipped under ``revbrowse/fixtures``."""
    return Path(str(files("revbrowse").joinpath("fixtures", *parts)))
