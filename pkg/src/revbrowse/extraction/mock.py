"""Rule-based offline extractor.

Aspect terms are matched as whole lowercase tokens. An item feature is the
aspect's feature phrase (it contains the aspect term); a user preference is
the aspect's preference phrase, worded in a separate vocabulary so that raw
token overlap between preferences and features is zero. That gap is what a
trained projection has to bridge.

Routing: rating >= 4 sends every matched aspect to pros/like, rating <= 2 to
cons/dislike. Rating 3 splits the text into clauses (``. ! ? ;`` and the word
"but") and routes each clause by comparing positive and negative sentiment
word counts; clauses with a tie are ignored.
"""

from __future__ import annotations

import json
import re

# term -> (feature phrase, preference phrase)
ASPECTS: dict[str, tuple[str, str]] = {
    "crunchy": ("crunchy texture", "crisp bites"),
    "fresh": ("fresh ingredients", "garden quality"),
    "sweet": ("sweet flavor", "sugary treats"),
    "spicy": ("spicy kick", "fiery heat"),
    "healthy": ("healthy nutrition", "wholesome eating"),
    "durable": ("durable build", "long lasting"),
    "soft": ("soft fabric", "gentle comfort"),
    "graphics": ("detailed graphics", "visual beauty"),
    "story": ("engaging story", "narrative depth"),
    "multiplayer": ("multiplayer modes", "social play"),
    "controls": ("responsive controls", "smooth handling"),
    "packaging": ("sturdy packaging", "careful wrapping"),
    "aroma": ("pleasant aroma", "nice smells"),
    "portable": ("portable size", "travel friendly"),
    "stylish": ("stylish design", "fashion sense"),
    "easy": ("easy setup", "simple operation"),
}

POSITIVE_WORDS = frozenset(
    "good great love loved excellent amazing perfect nice wonderful enjoy enjoyed best happy".split()
)
NEGATIVE_WORDS = frozenset(
    "bad poor hate hated terrible awful disappointing disappointed worst broke weak not".split()
)

_TOKEN = re.compile(r"[a-z0-9]+")
_CLAUSE = re.compile(r"[.!?;]+|\bbut\b")


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _terms(tokens) -> list[str]:
    seen = []
    for tok in tokens:
        if tok in ASPECTS and tok not in seen:
            seen.append(tok)
    return seen


def route_terms(rating: int, text: str) -> tuple[list[str], list[str]]:
    """Return ``(positive_terms, negative_terms)`` in order of first mention."""
    if rating >= 4:
        return _terms(_tokens(text)), []
    if rating <= 2:
        return [], _terms(_tokens(text))
    pos, neg = [], []
    for clause in _CLAUSE.split(text.lower()):
        toks = _tokens(clause)
        score = sum(t in POSITIVE_WORDS for t in toks) - sum(t in NEGATIVE_WORDS for t in toks)
        target = pos if score > 0 else neg if score < 0 else None
        if target is None:
            continue
        for term in _terms(toks):
            if term not in target:
                target.append(term)
    return pos, neg


def mock_extract(rating: int, text: str) -> tuple[list[str], list[str]]:
    """Item features ``(pros, cons)`` for one review."""
    pos, neg = route_terms(rating, text)
    return [ASPECTS[t][0] for t in pos][:5], [ASPECTS[t][0] for t in neg][:5]


def mock_extract_preferences(reviews) -> tuple[list[str], list[str]]:
    """User preferences ``(like, dislike)`` over ``(rating, text)`` pairs."""
    like, dislike = [], []
    for rating, text in reviews:
        pos, neg = route_terms(rating, text)
        for term in pos:
            phrase = ASPECTS[term][1]
            if phrase not in like:
                like.append(phrase)
        for term in neg:
            phrase = ASPECTS[term][1]
            if phrase not in dislike:
                dislike.append(phrase)
    return like[:5], dislike[:5]


def _slot_json(prompt: str, marker: str):
    start = prompt.index(marker) + len(marker)
    end = prompt.index("\n", start)
    return json.loads(prompt[start:end])


class MockChatClient:
    """Chat client that answers extraction prompts with :func:`mock_extract`.

    It reads the JSON slot back out of the rendered prompt, so the render →
    call → parse path is exercised exactly as with a remote model.
    """

    model = "mock-extractor-v1"

    def __init__(self):
        self.calls = 0

    def complete(self, messages) -> str:
        self.calls += 1
        prompt = messages[-1]["content"]
        if "User reviews: " in prompt:
            items = _slot_json(prompt, "User reviews: ")
            like, dislike = mock_extract_preferences((r["score"], r["review"]) for r in items)
            return "```json\n" + json.dumps({"Like": like, "Dislike": dislike}) + "\n```"
        if "Item review: " in prompt:
            item = _slot_json(prompt, "Item review: ")
            pros, cons = mock_extract(item["score"], item["review"])
            return json.dumps({"Pros": pros, "Cons": cons})
        return "I can only answer extraction prompts."
