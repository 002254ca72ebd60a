"""Command-line entry points: precompute, query, bench, calibrate, serve,
and the bundled case generator."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from qcfuse.bench import DEFAULT_RATIOS, calibrate_layer, run_benchmark, write_csv, write_json
from qcfuse.cases import load_cases, make_cases, retrieve
from qcfuse.config import AppConfig, load_config
from qcfuse.fusion import POLICIES, FusionEngine, RunOptions
from qcfuse.model import init_weights
from qcfuse.store import ChunkStore


def _open_engine(args, config: AppConfig) -> FusionEngine:
    weights = init_weights(config.model)
    store = ChunkStore(args.store, config.model, tier=config.tier)
    options = RunOptions(max_new=config.run.max_new)
    return FusionEngine(weights, store, cost=config.cost, options=options)


def cmd_precompute(args) -> int:
    config = load_config(args.config)
    chunk_tokens = args.chunk_tokens or config.run.chunk_tokens
    anchor_ratio = args.anchor_ratio or config.run.anchor_ratio
    weights = init_weights(config.model)
    store = ChunkStore(args.store, config.model, tier=config.tier)

    new_chunks = 0
    reused = 0
    for path in args.input:
        data = Path(path).read_bytes()
        if not data:
            print(f"warning: {path} is empty, skipped", file=sys.stderr)
            continue
        tokens = list(data)
        for start in range(0, len(tokens), chunk_tokens):
            piece = tokens[start:start + chunk_tokens]
            before = store.manifest.cache_misses
            store.precompute(weights, piece, anchor_ratio, source_name=Path(path).name)
            if store.manifest.cache_misses > before:
                new_chunks += 1
            else:
                reused += 1
    print(json.dumps({"store": str(args.store), "new_chunks": new_chunks,
                      "cache_hits": reused, "total_chunks": len(store.chunk_ids())}))
    return 0


def cmd_query(args) -> int:
    config = load_config(args.config)
    engine = _open_engine(args, config)
    top_k = args.top_k or config.run.top_k
    chunk_ids = retrieve(engine.store, args.query, top_k)
    if not chunk_ids:
        print("error: store is empty", file=sys.stderr)
        return 1
    res = engine.run(args.policy, args.ratio, chunk_ids, args.query,
                     compare_oracle=args.oracle)
    out = {
        "policy": res.policy,
        "ratio": res.ratio,
        "chunk_ids": chunk_ids,
        "answer_text": res.answer_text,
        "answer_tokens": res.answer_tokens,
        "n_ctx": int(len(res.selection.scores)),
        "n_selected": res.selection.n_selected,
        "selected_indices": res.selection.indices.tolist(),
        "ttft_sim": res.ttft_sim,
    }
    if res.comparison:
        out["oracle"] = {
            "logit_div_max": res.comparison.logit_div_max,
            "logit_kl": res.comparison.logit_kl,
            "token_match": res.comparison.token_match,
            "overlap": res.comparison.overlap,
        }
    print(json.dumps(out, indent=1, sort_keys=True))
    return 0


def cmd_bench(args) -> int:
    config = load_config(args.config)
    engine = _open_engine(args, config)
    queries = load_cases(args.cases)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICIES:
            print(f"error: unknown policy {p!r}", file=sys.stderr)
            return 1
    ratios = [float(r) for r in args.ratios.split(",")] if args.ratios else list(DEFAULT_RATIOS)

    def progress(done, total):
        print(f"\rcases {done}/{total}", end="", file=sys.stderr)

    report = run_benchmark(engine, queries, policies, ratios,
                           top_k=args.top_k or config.run.top_k, progress=progress)
    print("", file=sys.stderr)
    out = Path(args.out)
    write_json(report, out)
    write_csv(report, out.with_suffix(".csv"))
    print(json.dumps({"out": str(out), "csv": str(out.with_suffix('.csv')),
                      "rows": len(report["rows"]), "runs": report["meta"]["n_runs"]}))
    return 0


def cmd_calibrate(args) -> int:
    config = load_config(args.config)
    engine = _open_engine(args, config)
    queries = load_cases(args.cases)
    result = calibrate_layer(engine, queries, top_k=args.top_k or config.run.top_k)
    print(json.dumps(result, indent=1, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from qcfuse.service import create_app

    config = load_config(args.config)
    app = create_app(args.store, config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_make_cases(args) -> int:
    docs_dir, cases_path = make_cases(args.out, n_docs=args.docs,
                                      doc_bytes=args.doc_bytes,
                                      n_queries=args.queries, seed=args.seed)
    print(json.dumps({"docs_dir": str(docs_dir), "cases": str(cases_path)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcfuse",
        description="Chunk-level KV cache fusion with query-centric selective recomputation")
    parser.add_argument("--config", default=None,
                        help="key=value config file (default: $QCFUSE_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="chunk input files and cache their KV")
    p.add_argument("--store", required=True)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--chunk-tokens", type=int, default=None)
    p.add_argument("--anchor-ratio", type=float, default=None)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("query", help="answer one query under a policy")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--policy", default="QCFuse", choices=POLICIES)
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--oracle", action="store_true",
                   help="also run full computation and report divergence metrics")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="policy x ratio benchmark grid")
    p.add_argument("--store", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--policies", default="QCFuse,QCAll,QCLast,CacheBlend,KVShare,EPIC,Random")
    p.add_argument("--ratios", default=None, help="comma list, default 0.1..0.5")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out", required=True, help="JSON output path (CSV written alongside)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="recommend the critical probing layer")
    p.add_argument("--store", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the HTTP demo service")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-cases", help="generate synthetic docs and queries")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=6)
    p.add_argument("--doc-bytes", type=int, default=256)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_cases)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
