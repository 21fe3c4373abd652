"""Extraction prompt templates.

``{reviews}`` and ``{review}`` are filled with compact JSON
(``json.dumps(..., ensure_ascii=False)``) so that quotes in review text are
escaped and the slot round-trips through a JSON parser. Bump
``TEMPLATE_VERSION`` whenever a template or the serialization changes; it is
part of every cache key.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

TEMPLATE_VERSION = "v1"

USER_PREF_TEMPLATE = """\
Instruction:
Given a list of items a user bought along with their title, reviews, and score in JSON format, generate user preferences.

Input:
User reviews: {reviews}

Response:
A JSON object with two keys: Like and Dislike, each containing up to 5 high-level user preferences based on the comments.
Preferences must:
1. Reflect general likes and dislikes, not specific brands or items.
2. Be derived from the content of the reviews.
3. Exclude mentions of delivery time or pricing.
4. Be concise and simple.

Output format:
{{
  "Like": ["..."],
  "Dislike": ["..."]
}}
"""

ITEM_FEATURE_TEMPLATE = """\
Instruction:
Given user reviews of purchased items in JSON format, extract high-level item properties from the comments.

Input:
Item review: {review}

Response:
A JSON object with two keys: Pros and Cons, each containing up to 5 high-level item properties.
Properties must:
1. Summarize general strengths and weaknesses of the items.
2. Be derived from the content of the reviews.
3. Avoid mentioning specific brands or item names.
4. Exclude any comments related to delivery time or pricing.
5. Be simple, short, and concise.

Output format:
{{
  "Pros": ["..."],
  "Cons": ["..."]
}}
"""


def _review_object(title: str, text: str, rating: int, item_id: str = "") -> dict:
    title = (title or "").strip() or item_id
    return {"title": title, "review": text, "score": int(rating)}


def render_user_pref_prompt(reviews: Sequence[tuple]) -> str:
    """Render the preference prompt.

    ``reviews`` holds ``(title, text, rating)`` or ``(title, text, rating, item_id)``
    tuples in chronological order; an empty title falls back to the item id.
    """
    if not reviews:
        raise ValueError("at least one review is required")
    payload = [_review_object(*r) for r in reviews]
    return USER_PREF_TEMPLATE.format(reviews=json.dumps(payload, ensure_ascii=False))


def render_item_feature_prompt(review) -> str:
    """``review`` is a ``(title, text, rating[, item_id])`` tuple."""
    return ITEM_FEATURE_TEMPLATE.format(
        review=json.dumps(_review_object(*review), ensure_ascii=False)
    )


def review_tuples(reviews: Iterable, titles: dict) -> list[tuple]:
    """Map :class:`~revbrowse.corpus.Review` objects to prompt tuples."""
    return [(titles.get(r.item_id, ""), r.text, r.rating, r.item_id) for r in reviews]
