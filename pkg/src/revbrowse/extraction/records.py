from __future__ import annotations

from dataclasses import dataclass, field

MAX_PHRASES = 5


def clean_phrases(values) -> tuple[str, ...]:
    phrases = [v.strip() for v in values if v.strip()]
    return tuple(phrases[:MAX_PHRASES])


@dataclass(frozen=True)
class UserPreferences:
    user_id: str
    like: tuple[str, ...] = ()
    dislike: tuple[str, ...] = ()
    source_review_ids: tuple[str, ...] = field(default=(), compare=True)

    def __post_init__(self):
        object.__setattr__(self, "like", clean_phrases(self.like))
        object.__setattr__(self, "dislike", clean_phrases(self.dislike))
        object.__setattr__(self, "source_review_ids", tuple(self.source_review_ids))

    @property
    def empty(self) -> bool:
        return not self.like and not self.dislike

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "like": list(self.like),
            "dislike": list(self.dislike),
            "source_review_ids": list(self.source_review_ids),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UserPreferences":
        return cls(rec["user_id"], tuple(rec["like"]), tuple(rec["dislike"]), tuple(rec.get("source_review_ids", ())))


@dataclass(frozen=True)
class ItemFeatures:
    item_id: str
    review_id: str
    pros: tuple[str, ...] = ()
    cons: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pros", clean_phrases(self.pros))
        object.__setattr__(self, "cons", clean_phrases(self.cons))

    @property
    def empty(self) -> bool:
        return not self.pros and not self.cons

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "review_id": self.review_id,
            "pros": list(self.pros),
            "cons": list(self.cons),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ItemFeatures":
        return cls(rec["item_id"], rec["review_id"], tuple(rec["pros"]), tuple(rec["cons"]))
