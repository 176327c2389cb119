"""Command-line entry point: ingest, validate, build-cache, predict,
finetune, eval, sweep, synth.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. Diagnostics
go to stderr; data goes to files or stdout (NDJSON/JSON/CSV).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .cache import (
    DEFAULT_ALPHA,
    SupportSet,
    build_cache,
    read_cache_file,
    sample_support,
    support_to_embedding_set,
    write_cache_file,
)
from .errors import FscacheError
from .evaluation import EvalReport, SweepGrid, evaluate, run_grid_point, sweep
from .finetune import FinetuneConfig, finetune
from .inference import batch_predict
from .store import (
    EmbeddingSet,
    merge,
    normalize_set,
    read_embedding_file,
    write_embedding_file,
)
from .synthetic import PRESETS, SyntheticSpec, generate


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--deterministic", action="store_true", help="omit timestamps for golden-file diffing")
    p.add_argument("--workers", type=int, default=1, help="worker processes for batch work (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fscache", description="Few-shot training-free cache classifier over precomputed embeddings")
    parser.add_argument("--version", action="version", version=f"fscache {__version__}")
    parser.add_argument(
        "--config",
        help="JSON file of flag defaults; explicit flags override it, it overrides built-ins",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="merge embedding files into one normalized corpus")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="FILE")
    p.add_argument("--out", required=True)
    p.add_argument("--no-normalize", action="store_true", help="keep vectors as stored")
    _add_common(p)

    p = sub.add_parser("validate", help="check a file against the format and print a summary")
    p.add_argument("path")
    _add_common(p)

    p = sub.add_parser("build-cache", help="sample a k-shot support and build the key-value cache")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out", required=True)
    p.add_argument("--support-out", help="also write the sampled support records")
    _add_common(p)

    p = sub.add_parser("predict", help="classify queries; one NDJSON object per record")
    p.add_argument("--cache", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    _add_common(p)

    p = sub.add_parser("finetune", help="fine-tune cache keys on the cached support")
    p.add_argument("--cache", required=True)
    p.add_argument("--support", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="write the per-epoch training log as JSON")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a cache on a query file")
    p.add_argument("--cache", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--variant", choices=["ftnet", "ftnet-t"], help="override the recorded variant tag")
    p.add_argument("--real-partition", help="JSON file mapping real record ids to a source")
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.add_argument("--csv", help="also write flat per-source CSV rows")
    _add_common(p)

    p = sub.add_parser("sweep", help="grid of (k, alpha, seed) evaluations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", help="explicit query file (default: corpus minus support)")
    p.add_argument("--shots", default="1,2,4,8,16", help="comma-separated k values")
    p.add_argument("--alphas", default=str(DEFAULT_ALPHA), help="comma-separated alpha values")
    p.add_argument("--seeds", default="0..4", help="comma list and/or a..b ranges")
    p.add_argument("--out", help="reports JSON path (default stdout)")
    p.add_argument("--csv", help="also write flat per-source CSV rows")
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic embedding world")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named cluster geometry")
    p.add_argument("--spec", help="JSON spec file (alternative to --preset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--support-out", help="also write the support pool on its own")
    p.add_argument("--queries-out", help="also write the query pool on its own")
    _add_common(p)

    return parser


def _parse_int_list(text: str) -> list[int]:
    """Accepts "1,2,4" and "0..4" range pieces (inclusive)."""
    out: list[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if ".." in piece:
            lo, hi = piece.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif piece:
            out.append(int(piece))
    return out


def _parse_float_list(text: str) -> list[float]:
    return [float(piece) for piece in text.split(",") if piece.strip()]


def _timestamp(args) -> dict:
    if args.deterministic:
        return {}
    return {"generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat()}


def _write_json(payload, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


_CSV_FIELDS = ["k", "alpha", "seed", "variant", "source", "count", "accuracy", "f1", "average_precision", "mAcc"]


def _csv_rows(report: EvalReport) -> list[dict]:
    base = {
        "k": report.config.get("k"),
        "alpha": report.config.get("alpha"),
        "seed": report.config.get("seed"),
        "variant": report.config.get("variant"),
    }
    rows = []
    for src, st in report.per_source.items():
        rows.append({**base, "source": src, "count": st.count, "accuracy": st.accuracy, "f1": "", "average_precision": "", "mAcc": ""})
    rows.append(
        {
            **base,
            "source": "overall",
            "count": "",
            "accuracy": report.overall.accuracy,
            "f1": report.overall.f1,
            "average_precision": "" if report.overall.average_precision is None else report.overall.average_precision,
            "mAcc": "" if report.overall.macc is None else report.overall.macc,
        }
    )
    return rows


def _write_csv(reports: list[EvalReport], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for report in reports:
            writer.writerows(_csv_rows(report))


def _load_queries(path: str) -> EmbeddingSet:
    queries = read_embedding_file(path)
    if not queries.normalized:
        raise FscacheError(
            f"{path} is not normalized; run `fscache ingest` first (prediction assumes unit-norm queries)"
        )
    return queries


def cmd_ingest(args) -> int:
    sets = [read_embedding_file(p) for p in args.inputs]
    corpus = merge(sets) if len(sets) > 1 else sets[0]
    if not args.no_normalize:
        corpus = normalize_set(corpus)
    write_embedding_file(corpus, args.out)
    print(f"wrote {len(corpus)} records (dimension {corpus.dimension}) to {args.out}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    emb = read_embedding_file(args.path)
    by_source: dict[str, int] = {}
    for rec in emb.records:
        by_source[rec.source] = by_source.get(rec.source, 0) + 1
    _write_json(
        {
            "path": args.path,
            "dimension": emb.dimension,
            "backbone": emb.backbone,
            "layer": emb.layer,
            "normalized": emb.normalized,
            "count": len(emb),
            "records_per_source": dict(sorted(by_source.items())),
            "valid": True,
        },
        None,
    )
    return 0


def cmd_build_cache(args) -> int:
    corpus = read_embedding_file(args.corpus)
    support = sample_support(corpus, args.k, args.seed)
    cache = build_cache(support, args.alpha)
    write_cache_file(cache, args.out)
    if args.support_out:
        write_embedding_file(support_to_embedding_set(support), args.support_out)
    if support.shortfall:
        print(f"shortfall (fewer than k available): {support.shortfall}", file=sys.stderr)
    print(
        f"cached {cache.n_entries} entries ({len(support.sources)} fake sources, k={args.k}, seed={args.seed}) to {args.out}",
        file=sys.stderr,
    )
    return 0


def _prediction_lines(queries: EmbeddingSet, cache) -> list[str]:
    lines = []
    for rec, pred in zip(queries.records, batch_predict(queries, cache)):
        stats = pred.logits.stats
        lines.append(
            json.dumps(
                {
                    "id": rec.id,
                    "label": pred.label.display,
                    "logit_real": pred.logits.real,
                    "logit_fake": pred.logits.fake,
                    "max_similarity": stats.max_similarity,
                    "nearest_source": cache.entry_sources[stats.argmax_entry_index],
                },
                sort_keys=True,
            )
        )
    return lines


def cmd_predict(args) -> int:
    cache = read_cache_file(args.cache)
    queries = _load_queries(args.queries)
    text = "\n".join(_predict_parallel(queries, cache, args.workers)) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _predict_chunk(payload) -> list[str]:
    queries, cache = payload
    return _prediction_lines(queries, cache)


def _predict_parallel(queries: EmbeddingSet, cache, workers: int) -> list[str]:
    if workers <= 1 or len(queries) < 2 * workers:
        return _prediction_lines(queries, cache)
    chunks = []
    step = (len(queries) + workers - 1) // workers
    for start in range(0, len(queries), step):
        part = EmbeddingSet(
            queries.dimension,
            queries.backbone,
            queries.layer,
            queries.normalized,
            queries.records[start : start + step],
        )
        chunks.append((part, cache))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_predict_chunk, chunks))
    return [line for part in parts for line in part]


def cmd_finetune(args) -> int:
    cache = read_cache_file(args.cache)
    support_set = read_embedding_file(args.support)
    support = SupportSet(
        records=list(support_set.records),
        shots_per_source=int(cache.build_metadata.get("k") or 0),
        seed=int(cache.build_metadata.get("seed") or 0),
        sources=support_set.fake_sources(),
        shortfall={},
        dimension=support_set.dimension,
        backbone=support_set.backbone,
        layer=support_set.layer,
    )
    config = FinetuneConfig(lr=args.lr, weight_decay=args.weight_decay, epochs=args.epochs)
    tuned, log = finetune(cache, support, config)
    write_cache_file(tuned, args.out)
    if args.log:
        _write_json({**log.to_dict(), **_timestamp(args)}, args.log)
    final = log.epochs[-1].loss if log.epochs else log.initial_loss
    print(
        f"fine-tuned {tuned.n_entries} keys for {args.epochs} epochs "
        f"(loss {log.initial_loss:.4f} -> {final:.4f}) to {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_eval(args) -> int:
    cache = read_cache_file(args.cache)
    queries = _load_queries(args.queries)
    real_partition = None
    if args.real_partition:
        with open(args.real_partition) as fh:
            real_partition = json.load(fh)
    report = evaluate(cache, queries, variant=args.variant, real_partition=real_partition)
    _write_json({**report.to_dict(), **_timestamp(args)}, args.out)
    if args.csv:
        _write_csv([report], args.csv)
    return 0


def _sweep_point(payload) -> EvalReport:
    corpus, k, alpha, seed, queries = payload
    return run_grid_point(corpus, k, alpha, seed, queries)


def cmd_sweep(args) -> int:
    corpus = read_embedding_file(args.corpus)
    queries = _load_queries(args.queries) if args.queries else None
    grid = SweepGrid(
        shots=_parse_int_list(args.shots),
        alphas=_parse_float_list(args.alphas),
        seeds=_parse_int_list(args.seeds),
    )
    if args.workers > 1:
        payloads = [(corpus, k, a, s, queries) for (k, a, s) in grid.points()]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(_sweep_point, payloads))
    else:
        reports = sweep(corpus, grid, queries)
    _write_json({"reports": [r.to_dict() for r in reports], **_timestamp(args)}, args.out)
    if args.csv:
        _write_csv(reports, args.csv)
    return 0


def cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.spec):
        raise FscacheError("synth needs exactly one of --preset or --spec")
    if args.preset:
        spec = PRESETS[args.preset](args.seed)
    else:
        spec = SyntheticSpec.from_json(args.spec)
    emb = generate(spec)
    write_embedding_file(emb, args.out)
    if args.support_out or args.queries_out:
        from .synthetic import generate_pools

        support_pool, query_pool = generate_pools(spec)
        if args.support_out:
            write_embedding_file(support_pool, args.support_out)
        if args.queries_out:
            write_embedding_file(query_pool, args.queries_out)
    print(f"generated {len(emb)} records (dimension {emb.dimension}) to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "validate": cmd_validate,
    "build-cache": cmd_build_cache,
    "predict": cmd_predict,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> int:
    """Load --config (if present) as subcommand defaults.

    Precedence ends up flags > config file > built-in defaults because
    set_defaults only fills values the command line leaves unset.
    Returns 0, or an error exit code.
    """
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return 0  # absent, or dangling flag that argparse will reject itself
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        print(f"fscache: cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"fscache: bad config JSON: {exc}", file=sys.stderr)
        return 1
    if not isinstance(config, dict):
        print("fscache: config must be a JSON object of flag defaults", file=sys.stderr)
        return 1
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for sub_action in sub_actions:
        for sub_parser in sub_action.choices.values():
            known = {a.dest for a in sub_parser._actions}
            sub_parser.set_defaults(**{k: v for k, v in config.items() if k in known})
    return 0


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    code = _apply_config_defaults(parser, list(argv))
    if code != 0:
        return code
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FscacheError as exc:
        print(f"fscache {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fscache {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
