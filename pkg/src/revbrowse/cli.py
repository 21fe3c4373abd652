"""``revbrowse`` command line: one subcommand per pipeline stage.

Artifacts live in the work directory::

    ingest          -> corpus.jsonl      (k-core filtered reviews and titles)
    extract         -> extraction.jsonl  (item features, user preferences)
    build-trainset  -> trainset.jsonl    (contrastive samples)
    train           -> adapter.bin
    index           -> index.bin
    recommend       -> stdout, optional training-pair export
    evaluate        -> reports/

Exit codes: 0 success, 1 usage or configuration, 2 missing artifact,
3 remote client failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import artifacts
from .clients import ChatClient, CompletionScoringClient, EmbeddingClient, api_key_present
from .config import FIELDS, PipelineConfig, load_config
from .corpus import ItemMeta, Review, corpus_stats, kcore_filter, load_corpus
from .errors import ArtifactFormatError, ConfigError, DomainError, RevBrowseError
from .eval import evaluate, run_topk_sweep
from .extraction import ExtractionCache, ItemFeatures, MockChatClient, UserPreferences
from .pipeline import VARIANTS, RevBrowseRecommender, variant_flags
from .prefrag import ContrastiveSample, FeatureIndex, HashingEmbedder, ProjectionAdapter, embed_samples, hit_at_1
from .ranker import FILE, LETTERS, CandidateProvider, training_pair
from .ranker.candidates import MissingUserError

logger = logging.getLogger("revbrowse")

COMMANDS = ("ingest", "extract", "build-trainset", "train", "index", "recommend", "evaluate")


# components


def _require_key(cfg, what):
    if not api_key_present():
        raise ConfigError(f"{what} needs REVBROWSE_API_KEY; set it or enable the mock mode")


def chat_client(cfg: PipelineConfig):
    if cfg.mock_extraction:
        return MockChatClient()
    _require_key(cfg, "remote extraction")
    return ChatClient(cfg.base_url, cfg.chat_model, timeout=cfg.timeout, max_retries=cfg.max_retries,
                      rate_limit=cfg.rate_limit or None)


def embedder(cfg: PipelineConfig):
    if cfg.mock_embedding:
        return HashingEmbedder(cfg.embedding_dim)
    _require_key(cfg, "remote embedding")
    return EmbeddingClient(cfg.base_url, cfg.embedding_model, timeout=cfg.timeout, max_retries=cfg.max_retries,
                           rate_limit=cfg.rate_limit or None)


def scorer(cfg: PipelineConfig):
    if cfg.mock_scoring:
        return None
    _require_key(cfg, "remote scoring")
    return CompletionScoringClient(cfg.base_url, cfg.scoring_model, timeout=cfg.timeout,
                                   max_retries=cfg.max_retries, rate_limit=cfg.rate_limit or None)


def recommender(cfg: PipelineConfig, with_scorer=False) -> RevBrowseRecommender:
    provider = None
    if cfg.strategy == FILE:
        if not cfg.candidates_file:
            raise ConfigError("the FILE strategy needs candidates_file")
        provider = CandidateProvider.from_file(cfg.candidates_file)
    return RevBrowseRecommender(
        window=cfg.window,
        n_negatives=cfg.n_negatives,
        stride=cfg.stride,
        top_k=cfg.top_k,
        slate_size=cfg.slate_size,
        strategy=cfg.strategy,
        inject=cfg.inject,
        ablation=cfg.ablation,
        temperature=cfg.temperature,
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        step_size=cfg.step_size,
        random_state=cfg.seed,
        embedder=embedder(cfg),
        chat_client=chat_client(cfg),
        scorer=scorer(cfg) if with_scorer else None,
        allow_fallback=cfg.allow_fallback,
        cache=ExtractionCache(cfg.cache_path),
        max_retries=cfg.max_retries,
        concurrency=cfg.concurrency,
        candidate_provider=provider,
        dedupe=cfg.dedupe,
    )


# artifact readers


def _path(cfg, stage):
    return cfg.artifact(artifacts.FILES[stage])


def read_corpus(cfg, force=False):
    header, records = artifacts.read_jsonl(_path(cfg, "ingest"), "ingest", cfg, force)
    reviews = [Review(**{k: v for k, v in r.items() if k != "type"}) for r in records if r["type"] == "review"]
    items = [ItemMeta(r["item_id"], r["title"]) for r in records if r["type"] == "item"]
    return header, reviews, items


def read_extraction(cfg, force=False):
    header, records = artifacts.read_jsonl(_path(cfg, "extract"), "extract", cfg, force)
    features = [ItemFeatures.from_record(r) for r in records if r["type"] == "feature"]
    prefs = {r["user_id"]: UserPreferences.from_record(r) for r in records if r["type"] == "preference"}
    return header, features, prefs


def read_trainset(cfg, force=False):
    header, records = artifacts.read_jsonl(_path(cfg, "build-trainset"), "build-trainset", cfg, force)
    split = {"train": [], "validation": []}
    for r in records:
        split[r.pop("split")].append(ContrastiveSample.from_record(r))
    return header, split["train"], split["validation"]


def read_adapter(cfg, force=False):
    path = artifacts.require(_path(cfg, "train"), "train")
    try:
        adapter, meta = ProjectionAdapter.from_bytes(path.read_bytes())
        header = json.loads(meta["fingerprint"])
    except (ValueError, KeyError, RevBrowseError):
        raise ArtifactFormatError(f"{path} is not a readable adapter") from None
    return artifacts.check_header(header, path, "train", cfg, force), adapter


def read_index(cfg, force=False):
    path = artifacts.require(_path(cfg, "index"), "index")
    try:
        index = FeatureIndex.from_bytes(path.read_bytes())
    except (ValueError, RevBrowseError):
        raise ArtifactFormatError(f"{path} is not a readable index") from None
    return artifacts.check_header(index.meta.get("artifact"), path, "index", cfg, force), index


def _consistent(pairs):
    headers, paths = zip(*pairs)
    artifacts.merge_lineage(headers, paths)


def load_fitted(cfg, force=False, with_scorer=False):
    """Recommender assembled from the corpus, extraction, adapter and index artifacts."""
    h_corpus, reviews, items = read_corpus(cfg, force)
    h_extract, _, prefs = read_extraction(cfg, force)
    h_adapter, adapter = read_adapter(cfg, force)
    h_index, index = read_index(cfg, force)
    if not force:
        _consistent([(h_corpus, _path(cfg, "ingest")), (h_extract, _path(cfg, "extract")),
                     (h_adapter, _path(cfg, "train")), (h_index, _path(cfg, "index"))])
    rec = recommender(cfg, with_scorer)
    return rec.assemble(reviews, items, adapter, index, prefs)


# commands


def cmd_ingest(args, cfg):
    source = Path(args.input or cfg.corpus or "")
    if not cfg.corpus and not args.input:
        raise ConfigError("ingest needs an input corpus (positional argument or [paths] corpus)")
    if not source.is_file():
        raise ConfigError(f"corpus file {source} does not exist")
    parsed = load_corpus(source)
    reviews = kcore_filter(parsed.reviews, cfg.k_core)
    if not reviews:
        raise DomainError(f"no reviews survive {cfg.k_core}-core filtering")
    kept_items = {r.item_id for r in reviews}
    titles = {m.item_id: m.title for m in parsed.items}
    items = [ItemMeta(i, titles.get(i, i)) for i in sorted(kept_items)]
    sha = hashlib.sha256(source.read_bytes()).hexdigest()
    header = artifacts.make_header(cfg, "ingest", extra=sha)
    records = [{"type": "review", **r.to_record()} for r in reviews]
    records += [{"type": "item", "item_id": m.item_id, "title": m.title} for m in items]
    artifacts.write_jsonl(_path(cfg, "ingest"), header, records)
    stats = corpus_stats(reviews)
    print(f"read {parsed.lines} lines, skipped {parsed.skipped} malformed")
    print("kept " + ", ".join(f"{k} {v:.4g}" if isinstance(v, float) else f"{k} {v}" for k, v in stats.items()))
    print(f"wrote {_path(cfg, 'ingest')}")
    return 0


def cmd_extract(args, cfg):
    h_corpus, reviews, items = read_corpus(cfg, args.force)
    rec = recommender(cfg)
    rec._bind_corpus(reviews, items)
    features = rec.extract_features()
    prefs = rec.history_preferences()
    header = artifacts.make_header(cfg, "extract", [h_corpus])
    records = [{"type": "feature", **f.to_record()} for f in features]
    records += [{"type": "preference", **p.to_record()} for _, p in sorted(prefs.items()) if p is not None]
    artifacts.write_jsonl(_path(cfg, "extract"), header, records)
    empty = sum(p is None for p in prefs.values())
    print(f"features for {len(features)} reviews; preferences for {len(prefs) - empty} users ({empty} empty)")
    print(f"wrote {_path(cfg, 'extract')}")
    return 0


def cmd_build_trainset(args, cfg):
    h_corpus, reviews, items = read_corpus(cfg, args.force)
    h_extract, features, _ = read_extraction(cfg, args.force)
    if not args.force:
        _consistent([(h_corpus, _path(cfg, "ingest")), (h_extract, _path(cfg, "extract"))])
    rec = recommender(cfg)
    rec._bind_corpus(reviews, items)
    train, val = rec.build_trainsets(features)
    header = artifacts.make_header(cfg, "build-trainset", [h_extract])
    records = [{"split": "train", **s.to_record()} for s in train]
    records += [{"split": "validation", **s.to_record()} for s in val]
    artifacts.write_jsonl(_path(cfg, "build-trainset"), header, records)
    print(f"{len(train)} training samples, {len(val)} validation samples")
    print("  " + ", ".join(f"{k} {v}" for k, v in sorted(train.stats.items())))
    print(f"wrote {_path(cfg, 'build-trainset')}")
    return 0


def cmd_train(args, cfg):
    h_trainset, train, val = read_trainset(cfg, args.force)
    rec = recommender(cfg)
    rec.embedder_ = embedder(cfg)
    adapter = rec.train_adapter(train, val)
    header = artifacts.make_header(cfg, "train", [h_trainset])
    artifacts.write_bytes(_path(cfg, "train"), adapter.to_bytes(json.dumps(header, sort_keys=True)))
    for row in adapter.loss_trace_:
        val_loss = row.get("validation_loss")
        tail = "" if val_loss is None else f"  validation {val_loss:.4f}"
        print(f"epoch {row['epoch']}  train {row['train_loss']:.4f}{tail}")
    groups = embed_samples(val or train, rec.embedder_)
    if groups:
        base = ProjectionAdapter.identity(adapter.n_features_in_)
        label = "validation" if val else "training"
        print(f"{label} hit@1 {hit_at_1(groups, base):.3f} untrained -> {hit_at_1(groups, adapter):.3f} trained")
    print(f"best epoch {adapter.best_epoch_}; wrote {_path(cfg, 'train')}")
    return 0


def cmd_index(args, cfg):
    h_corpus, reviews, items = read_corpus(cfg, args.force)
    h_extract, features, _ = read_extraction(cfg, args.force)
    h_adapter, adapter = read_adapter(cfg, args.force)
    if not args.force:
        _consistent([(h_corpus, _path(cfg, "ingest")), (h_extract, _path(cfg, "extract")),
                     (h_adapter, _path(cfg, "train"))])
    rec = recommender(cfg)
    rec._bind_corpus(reviews, items)
    header = artifacts.make_header(cfg, "index", [h_adapter, h_extract])
    index = rec.build_index(features, adapter, meta={"artifact": header})
    artifacts.write_bytes(_path(cfg, "index"), index.to_bytes())
    print(f"indexed {len(index)} phrases over {index.item_count()} items; wrote {_path(cfg, 'index')}")
    return 0


def _print_recommendation(rec, titles, out=None):
    out = out or sys.stdout
    slate, result = rec.slate, rec.result
    note = ""
    if slate.ground_truth is not None:
        note = f"; held-out item {slate.ground_truth}" + (" injected" if rec.injected else " in slate")
    print(f"user {rec.user_id}: {len(slate)} candidates{note}", file=out)
    for position, i in enumerate(result.permutation, 1):
        cand = slate.candidates[i]
        mark = "*" if cand.item_id == slate.ground_truth else " "
        print(f"{position:3d}{mark}({LETTERS[i]}) {result.scores[i]: .4f}  {cand.item_id}  {cand.title}", file=out)
        if cand.retrieved_pros:
            print(f"        pros: {'; '.join(cand.retrieved_pros)}", file=out)
        if cand.retrieved_cons:
            print(f"        cons: {'; '.join(cand.retrieved_cons)}", file=out)
    if result.degraded:
        print("(degraded scoring: generation fallback)", file=out)


def export_pairs(rec, path):
    """Fine-tuning pairs whose label is each user's validation item."""
    include_prefs, include_features = variant_flags(rec.ablation)
    rows = 0
    with open(path, "w", encoding="utf-8") as fh:
        for user_id in sorted(rec.splits_):
            split = rec.splits_[user_id]
            try:
                r = rec.recommend(user_id, target=split.validation.item_id)
            except (DomainError, MissingUserError):
                continue
            if r.missed:
                continue
            history = [rec.titles_.get(e.item_id, e.item_id) for e in split.train]
            pair = training_pair(history, rec.user_prefs_.get(user_id), r.slate, include_prefs, include_features)
            fh.write(json.dumps(pair, ensure_ascii=False, sort_keys=True) + "\n")
            rows += 1
    return rows


def cmd_recommend(args, cfg):
    if not args.user_id and not args.export_pairs:
        raise ConfigError("recommend needs a user id or --export-pairs")
    rec = load_fitted(cfg, args.force, with_scorer=True)
    if args.user_id:
        if args.user_id not in rec.splits_:
            raise DomainError(f"unknown user {args.user_id!r}")
        try:
            _print_recommendation(rec.recommend(args.user_id), rec.titles_)
        except MissingUserError:
            raise DomainError(f"candidates file has no slate for {args.user_id!r}") from None
    if args.export_pairs:
        rows = export_pairs(rec, args.export_pairs)
        print(f"wrote {rows} training pairs to {args.export_pairs}")
    return 0


def cmd_evaluate(args, cfg):
    rec = load_fitted(cfg, args.force, with_scorer=True)
    users = sorted(rec.splits_)
    if args.limit:
        users = users[: args.limit]
    if args.sweep:
        reports = run_topk_sweep(rec, args.sweep, users, n_jobs=cfg.concurrency)
    elif args.all_variants:
        reports = [evaluate(rec, users, ablation=v, n_jobs=cfg.concurrency) for v in VARIANTS]
    else:
        reports = [evaluate(rec, users, n_jobs=cfg.concurrency)]
    out_dir = Path(args.reports or cfg.artifact("reports"))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.to_jsonl())
    for report in reports:
        report.write_rank_dump(out_dir / f"ranks-{report.fingerprint_hash}.jsonl")
        print(report.to_table())
        print()
    print(f"wrote {out_dir / 'metrics.jsonl'}")
    worst = max(r.skipped_fraction for r in reports)
    if worst > args.max_skipped_fraction:
        print(
            f"skipped fraction {worst:.3f} exceeds --max-skipped-fraction {args.max_skipped_fraction}",
            file=sys.stderr,
        )
        return 4
    return 0


HANDLERS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "build-trainset": cmd_build_trainset,
    "train": cmd_train,
    "index": cmd_index,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
}


# argument parsing


def _config_flags(parser):
    """One flag per configuration field; ``None`` defaults let the file win."""
    defaults = PipelineConfig.__dataclass_fields__
    groups = {}
    for name, f in FIELDS.items():
        section = f.metadata["section"]
        group = groups.get(section) or parser.add_argument_group(f"[{section}] settings")
        groups[section] = group
        flag = "--" + name.replace("_", "-")
        default = defaults[name].default
        shown = "mock when REVBROWSE_API_KEY is unset" if default is None else default
        help_text = f"{f.metadata['help']} (default: {shown})"
        kind = f.type if isinstance(f.type, str) else f.type.__name__
        if kind == "bool":
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None, help=help_text)
        else:
            conv = {"int": int, "float": float}.get(kind, str)
            group.add_argument(flag, dest=name, type=conv, default=None, choices=f.metadata["choices"],
                               help=help_text, metavar=None if f.metadata["choices"] else kind.upper())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file (default: $REVBROWSE_CONFIG)")
    common.add_argument("--force", action="store_true", help="accept artifacts built with other settings")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    _config_flags(common)

    parser = argparse.ArgumentParser(prog="revbrowse", description="Review-driven reranking pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="parse and k-core filter a corpus")
    p.add_argument("input", nargs="?", help="raw review JSONL (default: [paths] corpus)")
    sub.add_parser("extract", parents=[common], help="extract item features and preferences")
    sub.add_parser("build-trainset", parents=[common], help="build contrastive samples")
    sub.add_parser("train", parents=[common], help="train the projection adapter")
    sub.add_parser("index", parents=[common], help="index train-review features")
    p = sub.add_parser("recommend", parents=[common], help="rank a slate for one user")
    p.add_argument("user_id", nargs="?", help="user to rank for")
    p.add_argument("--export-pairs", metavar="PATH", help="write prompt/label pairs for every user")
    p = sub.add_parser("evaluate", parents=[common], help="leave-one-out evaluation")
    p.add_argument("--all-variants", action="store_true", help="evaluate every ablation variant")
    p.add_argument("--sweep", type=int, nargs="+", metavar="K", help="evaluate each retrieval depth K")
    p.add_argument("--limit", type=int, default=0, help="evaluate only the first N users, 0 for all (default: %(default)s)")
    p.add_argument("--reports", help="report directory (default: <workdir>/reports)")
    p.add_argument("--max-skipped-fraction", type=float, default=1.0,
                   help="exit 4 when more users than this fraction miss the slate (default: %(default)s)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    overrides = {name: getattr(args, name) for name in FIELDS}
    try:
        cfg = load_config(args.config, **overrides)
        return HANDLERS[args.command](args, cfg)
    except RevBrowseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
