"""Turn raw chat-model output into validated preference / feature records.

Models wrap JSON in code fences, prose or both, so the parsers scan for the
first balanced ``{...}`` substring that decodes to a JSON object.
"""

from __future__ import annotations

import json

from ..errors import EmptyRecordError, RepairableParseError, SchemaError
from .records import ItemFeatures, UserPreferences


def _balanced_end(text: str, start: int) -> int:
    depth = 0
    in_string = False
    escaped = False
    for pos in range(start, len(text)):
        ch = text[pos]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return pos
    return -1


def find_json_object(raw: str) -> dict:
    if not isinstance(raw, str):
        raise RepairableParseError(f"expected text, got {type(raw).__name__}")
    start = raw.find("{")
    while start != -1:
        end = _balanced_end(raw, start)
        if end != -1:
            try:
                obj = json.loads(raw[start : end + 1])
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict):
                return obj
        start = raw.find("{", start + 1)
    raise RepairableParseError("no JSON object found in response")


def _string_list(obj: dict, key: str) -> list[str]:
    matches = [k for k in obj if isinstance(k, str) and k.strip().lower() == key.lower()]
    if not matches:
        raise SchemaError(f"response is missing key {key!r}")
    value = obj[matches[0]]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"{key!r} must be an array of strings")
    return value


def parse_preference_response(raw: str, user_id: str = "", source_review_ids=()) -> UserPreferences:
    obj = find_json_object(raw)
    prefs = UserPreferences(
        user_id, tuple(_string_list(obj, "Like")), tuple(_string_list(obj, "Dislike")), tuple(source_review_ids)
    )
    if prefs.empty:
        raise EmptyRecordError("both Like and Dislike are empty")
    return prefs


def parse_feature_response(raw: str, item_id: str = "", review_id: str = "") -> ItemFeatures:
    obj = find_json_object(raw)
    feats = ItemFeatures(item_id, review_id, tuple(_string_list(obj, "Pros")), tuple(_string_list(obj, "Cons")))
    if feats.empty:
        raise EmptyRecordError("both Pros and Cons are empty")
    return feats
