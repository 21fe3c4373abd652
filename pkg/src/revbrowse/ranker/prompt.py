"""Recommendation prompt rendering.

History and preferences are rendered as compact JSON; candidates are one
line each, ``(A) title: ..., pros: p1; p2, cons: ...`` with ``none`` for an
empty side. The prompt ends right after ``Response:`` followed by a newline
so that the next token is the answer letter; training exports append the
label there.
"""

from __future__ import annotations

import json

from .slate import LETTERS

HISTORY_LENGTH = 20

INSTRUCTION = (
    "Given user history in chronological order, recommend an item from the candidate pool with its index letter."
)


def _phrases(items) -> str:
    return "; ".join(items) if items else "none"


def render_candidates(slate, include_features: bool = True) -> str:
    lines = []
    for letter, cand in zip(LETTERS, slate.candidates):
        if include_features:
            lines.append(
                f"({letter}) title: {cand.title}, pros: {_phrases(cand.retrieved_pros)}, "
                f"cons: {_phrases(cand.retrieved_cons)}"
            )
        else:
            lines.append(f"({letter}) title: {cand.title}")
    return "\n".join(lines)


def render_preference(prefs) -> str:
    like = list(prefs.like) if prefs is not None else []
    dislike = list(prefs.dislike) if prefs is not None else []
    return json.dumps({"Like": like, "Dislike": dislike}, ensure_ascii=False)


def render_recommendation_prompt(
    history_titles,
    prefs,
    slate,
    include_preferences: bool = True,
    include_features: bool = True,
    label: str | None = None,
) -> str:
    """Render the ranking prompt for one user.

    Only the most recent ``HISTORY_LENGTH`` titles are kept. Turning off
    ``include_preferences`` drops the preference line; turning off
    ``include_features`` renders candidates by title only.
    """
    history = list(history_titles)
    if not history:
        raise ValueError("history must not be empty")
    history = history[-HISTORY_LENGTH:]
    parts = [
        "Instruction:",
        INSTRUCTION,
        "",
        "Input:",
        f"User history: {json.dumps(history, ensure_ascii=False)};",
    ]
    if include_preferences:
        parts.append(f"User preference: {render_preference(prefs)};")
    parts.append(f"Candidate pool: {render_candidates(slate, include_features)}")
    parts += ["", "Response:", label or ""]
    return "\n".join(parts)


def training_pair(history_titles, prefs, slate, include_preferences=True, include_features=True) -> dict:
    """``{"prompt", "label"}`` record for an external fine-tuning job."""
    if slate.ground_truth is None:
        raise ValueError("slate has no ground truth")
    letter = LETTERS[slate.item_ids.index(slate.ground_truth)]
    prompt = render_recommendation_prompt(history_titles, prefs, slate, include_preferences, include_features)
    return {"prompt": prompt, "label": letter}
