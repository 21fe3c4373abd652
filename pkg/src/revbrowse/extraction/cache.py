from __future__ import annotations

import hashlib
import json
import os
import threading

from .prompts import TEMPLATE_VERSION


def cache_key(kind: str, inputs, model_id: str, template_version: str = TEMPLATE_VERSION) -> str:
    blob = json.dumps([template_version, kind, inputs, model_id], ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ExtractionCache:
    """Append-only line-delimited cache of extraction results.

    Values are plain dicts (record form) or ``None`` for responses that
    produced an empty record. Later lines win on duplicate keys. With
    ``path=None`` the cache lives in memory only.
    """

    def __init__(self, path=None):
        self.path = path
        self._data: dict[str, dict | None] = {}
        self._lock = threading.Lock()
        if path is not None and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        # torn final write from an interrupted run
                        continue
                    self._data[rec["key"]] = rec["value"]

    def __contains__(self, key):
        return key in self._data

    def __len__(self):
        return len(self._data)

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value) -> None:
        with self._lock:
            self._data[key] = value
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"key": key, "value": value}, ensure_ascii=False, sort_keys=True) + "\n")
