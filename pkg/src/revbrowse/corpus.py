"""Review ingestion, k-core filtering, per-user sequences and leave-one-out splits."""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Iterator

from .errors import CorpusFormatError, SplitError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Review:
    review_id: str
    user_id: str
    item_id: str
    rating: int
    text: str
    timestamp: int
    summary: str = ""
    helpful_votes: int = 0

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise ValueError(f"rating must be in 1..5, got {self.rating!r}")
        if self.helpful_votes < 0:
            raise ValueError("helpful_votes must be non-negative")

    @property
    def empty_text(self) -> bool:
        return not self.text.strip()

    def to_record(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ItemMeta:
    item_id: str
    title: str

    def __post_init__(self):
        if not self.title.strip():
            object.__setattr__(self, "title", self.item_id)


@dataclass(frozen=True)
class Event:
    item_id: str
    review_id: str
    timestamp: int


@dataclass(frozen=True)
class InteractionSequence:
    user_id: str
    events: tuple[Event, ...]

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class SplitSpec:
    user_id: str
    train: tuple[Event, ...]
    validation: Event
    test: Event


@dataclass
class ParseResult:
    reviews: list[Review] = field(default_factory=list)
    items: list[ItemMeta] = field(default_factory=list)
    skipped: int = 0
    lines: int = 0

    def __iter__(self):
        # allows `reviews, items = parse_reviews(...)`
        yield self.reviews
        yield self.items


def _as_int(value, name):
    if isinstance(value, bool):
        raise ValueError(f"{name} is not numeric")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{name} is not integral: {value}")
        return int(value)
    if isinstance(value, str):
        return int(float(value)) if "." in value else int(value)
    if isinstance(value, int):
        return value
    raise ValueError(f"{name} has unsupported type {type(value).__name__}")


def _review_from_record(rec: dict, line_no: int) -> Review:
    if "user_id" in rec:
        # canonical form written by write_corpus
        return Review(
            review_id=str(rec["review_id"]),
            user_id=str(rec["user_id"]),
            item_id=str(rec["item_id"]),
            rating=_as_int(rec["rating"], "rating"),
            text=str(rec.get("text") or ""),
            timestamp=_as_int(rec["timestamp"], "timestamp"),
            summary=str(rec.get("summary") or ""),
            helpful_votes=_as_int(rec.get("helpful_votes", 0), "helpful_votes"),
        )
    helpful = rec.get("helpful") or [0, 0]
    if not isinstance(helpful, (list, tuple)) or not helpful:
        raise ValueError("helpful must be a pair of integers")
    review_id = rec.get("reviewID") or rec.get("review_id") or f"r{line_no:09d}"
    return Review(
        review_id=str(review_id),
        user_id=str(rec["reviewerID"]),
        item_id=str(rec["asin"]),
        rating=_as_int(rec["overall"], "overall"),
        text=str(rec.get("reviewText") or ""),
        timestamp=_as_int(rec["unixReviewTime"], "unixReviewTime"),
        summary=str(rec.get("summary") or ""),
        helpful_votes=_as_int(helpful[0], "helpful"),
    )


def parse_reviews(stream: IO[str] | Iterable[str], max_malformed_fraction: float = 0.5) -> ParseResult:
    """Parse line-delimited review and metadata records.

    Review lines use either the Amazon-2014 field names (``reviewerID``,
    ``asin``, ``overall``, ...) or the canonical names produced by
    :func:`write_corpus`. Lines carrying ``asin``/``title`` without a reviewer
    become :class:`ItemMeta`. Raw lines lacking an id get ``r<line>``.
    """
    result = ParseResult()
    seen_ids: set[str] = set()
    seen_items: dict[str, int] = {}
    for line_no, line in enumerate(stream):
        if not line.strip():
            continue
        result.lines += 1
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            if "reviewerID" in rec or "user_id" in rec:
                review = _review_from_record(rec, line_no)
                if review.review_id in seen_ids:
                    raise ValueError(f"duplicate review_id {review.review_id}")
                seen_ids.add(review.review_id)
                result.reviews.append(review)
            elif "title" in rec and ("asin" in rec or "item_id" in rec):
                item_id = str(rec.get("asin", rec.get("item_id")))
                meta = ItemMeta(item_id, str(rec["title"] or ""))
                if item_id in seen_items:
                    result.items[seen_items[item_id]] = meta
                else:
                    seen_items[item_id] = len(result.items)
                    result.items.append(meta)
            else:
                raise ValueError("unrecognized record")
        except (ValueError, KeyError, TypeError) as exc:
            logger.debug("skipping line %d: %s", line_no + 1, exc)
            result.skipped += 1
    if result.lines and result.skipped / result.lines > max_malformed_fraction:
        raise CorpusFormatError(
            f"{result.skipped} of {result.lines} lines are malformed; not a review corpus?"
        )
    return result


def load_corpus(path) -> ParseResult:
    with open(path, encoding="utf-8") as fh:
        return parse_reviews(fh)


def kcore_filter(reviews: list[Review], k: int = 5) -> list[Review]:
    """Drop users and items with fewer than ``k`` interactions until nothing changes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    alive = list(reviews)
    while True:
        users = Counter(r.user_id for r in alive)
        items = Counter(r.item_id for r in alive)
        kept = [r for r in alive if users[r.user_id] >= k and items[r.item_id] >= k]
        if len(kept) == len(alive):
            return kept
        alive = kept


def _event_key(review: Review):
    return (review.timestamp, review.review_id)


def build_sequences(reviews: Iterable[Review]) -> list[InteractionSequence]:
    by_user: dict[str, list[Review]] = defaultdict(list)
    for r in reviews:
        by_user[r.user_id].append(r)
    out = []
    for user_id in sorted(by_user):
        ordered = sorted(by_user[user_id], key=_event_key)
        out.append(
            InteractionSequence(
                user_id, tuple(Event(r.item_id, r.review_id, r.timestamp) for r in ordered)
            )
        )
    return out


def leave_one_out_split(seq: InteractionSequence) -> SplitSpec:
    if len(seq.events) < 3:
        raise SplitError(seq.user_id, len(seq.events))
    return SplitSpec(seq.user_id, seq.events[:-2], seq.events[-2], seq.events[-1])


def train_review_ids(splits: Iterable[SplitSpec]) -> set[str]:
    return {e.review_id for s in splits for e in s.train}


def corpus_stats(reviews: list[Review]) -> dict:
    """Users, items, interactions, mean sequence length and density.

    Density is interactions / (users * items).
    """
    users = {r.user_id for r in reviews}
    items = {r.item_id for r in reviews}
    n = len(reviews)
    return {
        "users": len(users),
        "items": len(items),
        "interactions": n,
        "length": n / len(users) if users else 0.0,
        "density": n / (len(users) * len(items)) if users and items else 0.0,
    }


def write_corpus(path, reviews: Iterable[Review], items: Iterable[ItemMeta] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reviews:
            fh.write(json.dumps(r.to_record(), ensure_ascii=False, sort_keys=True) + "\n")
        for m in items:
            fh.write(json.dumps({"item_id": m.item_id, "title": m.title}, ensure_ascii=False, sort_keys=True) + "\n")


def iter_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
