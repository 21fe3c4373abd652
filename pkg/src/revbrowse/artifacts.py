"""Stage artifacts with embedded fingerprints.

Every artifact carries a header ``{"stage", "params", "lineage"}``:
``params`` hashes the settings of the stage that wrote it and ``lineage``
maps each contributing stage to its fingerprint. A stage's fingerprint
hashes its own settings together with its inputs' fingerprints, so any
upstream change propagates downstream. Loading checks ``params`` against
the current configuration and requires all loaded artifacts to agree on
shared lineage entries.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .config import digest
from .errors import ArtifactFormatError, MissingArtifactError, StaleArtifactError

STAGES = ("ingest", "extract", "build-trainset", "train", "index")

FILES = {
    "ingest": "corpus.jsonl",
    "extract": "extraction.jsonl",
    "build-trainset": "trainset.jsonl",
    "train": "adapter.bin",
    "index": "index.bin",
}


def make_header(config, stage, upstream=(), extra=None) -> dict:
    """Header for a new artifact of ``stage`` built from ``upstream`` headers."""
    lineage = merge_lineage(upstream)
    params = config.stage_digest(stage)
    parents = sorted(h["lineage"][h["stage"]] for h in upstream)
    lineage[stage] = digest({"params": params, "parents": parents, "extra": extra})
    return {"stage": stage, "params": params, "lineage": lineage}


def merge_lineage(headers, paths=None) -> dict:
    """Union of lineages; a disagreement names the stage that must be rerun."""
    merged = {}
    for n, h in enumerate(headers):
        for stage, fp in h["lineage"].items():
            if stage in merged and merged[stage] != fp:
                nxt = STAGES[STAGES.index(stage) + 1] if stage != STAGES[-1] else stage
                where = paths[n] if paths else h["stage"]
                raise StaleArtifactError(where, nxt)
            merged[stage] = fp
    return merged


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, header, records) -> None:
    lines = [json.dumps({"artifact": header}, sort_keys=True)]
    lines.extend(json.dumps(r, sort_keys=True, ensure_ascii=False) for r in records)
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def write_bytes(path, data: bytes) -> None:
    _atomic_write(Path(path), data)


def check_header(header, path, stage, config, force=False) -> dict:
    if not isinstance(header, dict) or header.get("stage") != stage or "lineage" not in header:
        raise ArtifactFormatError(f"{path} is not a {stage} artifact")
    if not force and header.get("params") != config.stage_digest(stage):
        raise StaleArtifactError(path, stage)
    return header


def require(path, stage) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path, stage)
    return path


def read_jsonl(path, stage, config, force=False) -> tuple[dict, list[dict]]:
    path = require(path, stage)
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    try:
        first = json.loads(lines[0])["artifact"] if lines else None
        records = [json.loads(line) for line in lines[1:]]
    except (json.JSONDecodeError, KeyError, TypeError):
        raise ArtifactFormatError(f"{path} is not a readable {stage} artifact") from None
    return check_header(first, path, stage, config, force), records
