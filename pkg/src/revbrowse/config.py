"""Pipeline configuration: INI file sections, flag overrides and stage fingerprints."""

from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from io import StringIO
from pathlib import Path

from .clients import api_key_present
from .errors import ConfigError
from .pipeline import VARIANTS
from .ranker.candidates import STRATEGIES
from .ranker.slate import MAX_SLATE

CONFIG_ENV = "REVBROWSE_CONFIG"


def _opt(section, default, help, lo=None, hi=None, choices=None):
    return field(default=default, metadata={"section": section, "help": help, "lo": lo, "hi": hi, "choices": choices})


@dataclass(frozen=True)
class PipelineConfig:
    # paths
    workdir: str = _opt("paths", "revbrowse-work", "directory holding every pipeline artifact")
    corpus: str = _opt("paths", "", "raw review JSONL read by ingest")
    cache: str = _opt("paths", "", "extraction cache file (default: <workdir>/extraction_cache.jsonl)")
    candidates_file: str = _opt("paths", "", "per-user slates for the FILE strategy")
    # client
    base_url: str = _opt("client", "https://api.openai.com/v1", "OpenAI-compatible endpoint")
    chat_model: str = _opt("client", "gpt-4o-mini", "extraction chat model")
    embedding_model: str = _opt("client", "text-embedding-3-small", "embedding model")
    scoring_model: str = _opt("client", "gpt-3.5-turbo-instruct", "completion model scored through letter logprobs")
    concurrency: int = _opt("client", 4, "parallel extraction requests", 1, 64)
    max_retries: int = _opt("client", 3, "retries per remote call", 0, 10)
    timeout: float = _opt("client", 60.0, "request timeout in seconds", 1.0, 600.0)
    rate_limit: float = _opt("client", 0.0, "requests per second, 0 for unlimited", 0.0, 1000.0)
    # preprocessing
    k_core: int = _opt("preprocess", 5, "k-core threshold for users and items", 1, 100)
    # retriever
    window: int = _opt("prefrag", 20, "sliding window length w", 3, 200)
    n_negatives: int = _opt("prefrag", 40, "negatives per contrastive sample m", 1, 1000)
    stride: int = _opt("prefrag", 1, "window stride", 1, 100)
    embedding_dim: int = _opt("prefrag", 384, "hashing embedder width", 8, 8192)
    temperature: float = _opt("prefrag", 1.0, "InfoNCE temperature", 1e-3, 100.0)
    epochs: int = _opt("prefrag", 5, "training epochs", 0, 5)
    batch_size: int = _opt("prefrag", 8, "mini-batch size", 1, 4096)
    step_size: float = _opt("prefrag", 0.05, "gradient step size", 1e-6, 10.0)
    seed: int = _opt("prefrag", 0, "seed for training, windows and slate injection", 0, 2**31 - 1)
    dedupe: bool = _opt("prefrag", True, "drop duplicate phrases per item and polarity in the index")
    # ranker
    top_k: int = _opt("ranker", 2, "retrieved pros/cons per candidate K", 1, 5)
    slate_size: int = _opt("ranker", 20, "candidates per slate", 2, MAX_SLATE)
    strategy: str = _opt("ranker", "POPULARITY", "candidate provider", choices=STRATEGIES)
    inject: bool = _opt("ranker", True, "insert the held-out item into evaluation slates")
    ablation: str = _opt("ranker", "FULL", "prompt ablation variant", choices=VARIANTS)
    allow_fallback: bool = _opt("ranker", False, "parse generated text when logprobs are unavailable")
    # mode
    mock_extraction: bool = _opt("mode", None, "use the lexicon extractor instead of a chat model")
    mock_embedding: bool = _opt("mode", None, "use the hashing embedder instead of an embedding model")
    mock_scoring: bool = _opt("mode", None, "rank with cosine scores instead of a scoring model")

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.metadata["section"] == "mode" and value is None:
                object.__setattr__(self, f.name, not api_key_present())
                continue
            lo, hi, choices = f.metadata["lo"], f.metadata["hi"], f.metadata["choices"]
            if choices and value not in choices:
                raise ConfigError(f"{f.name} must be one of {', '.join(choices)}, got {value!r}")
            if lo is not None and not lo <= value <= hi:
                raise ConfigError(f"{f.name} must be in [{lo}, {hi}], got {value!r}")

    # paths

    @property
    def root(self) -> Path:
        return Path(self.workdir)

    def artifact(self, name: str) -> Path:
        return self.root / name

    @property
    def cache_path(self) -> Path:
        return Path(self.cache) if self.cache else self.artifact("extraction_cache.jsonl")

    # fingerprints

    def fingerprint(self) -> str:
        return digest(asdict(self))

    def stage_params(self, stage: str) -> dict:
        """The settings a stage's output depends on (upstream artifacts aside)."""
        if stage not in STAGE_KEYS:
            raise KeyError(stage)
        return {k: getattr(self, k) for k in STAGE_KEYS[stage]}

    def stage_digest(self, stage: str) -> str:
        return digest({"stage": stage, **self.stage_params(stage)})

    def with_overrides(self, **overrides) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


STAGE_KEYS = {
    "ingest": ("k_core",),
    "extract": ("mock_extraction", "chat_model"),
    "build-trainset": ("window", "n_negatives", "stride", "seed"),
    "train": ("mock_embedding", "embedding_model", "embedding_dim", "temperature", "epochs", "batch_size", "step_size", "seed"),
    "index": ("dedupe",),
}


def digest(payload) -> str:
    """Short stable hash of a JSON-serializable payload."""
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:16]


def _coerce(f, raw: str):
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


FIELDS = {f.name: f for f in fields(PipelineConfig)}
SECTIONS = sorted({f.metadata["section"] for f in FIELDS.values()})


def read_config_file(path) -> dict:
    """Parse an INI file into field values, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            f = FIELDS.get(key)
            if f is None or f.metadata["section"] != section:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            values[key] = _coerce(f, raw)
    return values


def load_config(path=None, **overrides) -> PipelineConfig:
    """Defaults, then the config file (``path`` or ``$REVBROWSE_CONFIG``), then overrides."""
    path = path or os.environ.get(CONFIG_ENV)
    values = read_config_file(path) if path else {}
    unknown = set(overrides) - set(FIELDS)
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(sorted(unknown))}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def render_config(config: PipelineConfig) -> str:
    """INI text reproducing ``config``."""
    parser = configparser.ConfigParser(interpolation=None)
    for f in FIELDS.values():
        section = f.metadata["section"]
        if not parser.has_section(section):
            parser.add_section(section)
        value = getattr(config, f.name)
        parser.set(section, f.name, str(value).lower() if isinstance(value, bool) else str(value))
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
