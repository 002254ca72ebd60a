"""HTTP facade for the interactive demo: chunk browsing and upload, policy
runs with per-layer recomputation traces, and a replayable event stream.

Every response shape is pinned by the JSON schema shipped at
``qcfuse/schema/api.schema.json``; the contract tests validate each endpoint
against it. Queries never mutate chunk files; uploads serialize on the store
lock while runs execute concurrently over shared immutable state.
"""

from __future__ import annotations

import asyncio
import json
import threading
from collections import OrderedDict
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from qcfuse.cases import cosine, byte_4grams, retrieve_scored
from qcfuse.config import AppConfig
from qcfuse.fusion import POLICIES, FusionEngine, RunOptions, RunResult
from qcfuse.model import init_weights, render_tokens
from qcfuse.store import ChunkStore, FingerprintMismatch

MAX_RUN_LOG = 100

SCHEMA_PATH = Path(__file__).parent / "schema" / "api.schema.json"


def _chunk_summary(store: ChunkStore, chunk_id: str) -> dict:
    meta = store.load_meta(chunk_id)
    return {
        "chunk_id": chunk_id,
        "source_name": meta.source_name,
        "n_tokens": meta.n_tokens,
        "preview": render_tokens(meta.token_ids[:80]),
        "anchor_count": int(len(meta.anchor_indices)),
    }


def _run_record(run_id: int, request: dict, chunk_ids: list[str],
                res: RunResult, fused_tokens, chunk_of, comparison: dict | None,
                retrieval: list[dict]) -> dict:
    selected = set(int(i) for i in res.selection.indices)
    tokens = []
    for i, tok in enumerate(fused_tokens):
        pos = i + 1
        tokens.append({
            "position": pos,
            "chunk_id": chunk_ids[int(chunk_of[i])],
            "text": render_tokens([int(tok)]),
            "selected": pos in selected,
            "score": float(res.selection.scores[i]),
        })
    events = [{
        "layer": layer,
        "indices": [int(i) for i in res.selection.indices],
        "timestamp": res.schedule.compute_end[layer - 1],
    } for layer in range(1, res.schedule.n_layers + 1)]
    return {
        "run_id": run_id,
        "request": request,
        "retrieval": retrieval,
        "result": {
            "policy": res.policy,
            "ratio": res.ratio,
            "answer_text": res.answer_text,
            "answer_tokens": [int(t) for t in res.answer_tokens],
            "first_token_logits": [float(x) for x in res.first_logits],
            "selection": {
                "policy": res.selection.policy,
                "ratio": res.selection.ratio,
                "n_selected": res.selection.n_selected,
                "indices": [int(i) for i in res.selection.indices],
                "scores": [float(s) for s in res.selection.scores],
            },
            "schedule": {
                "pre_phase": res.schedule.pre_phase,
                "ttft": res.schedule.ttft,
                "layers": [{
                    "layer": i + 1,
                    "fetch_start": res.schedule.fetch_start[i],
                    "fetch_end": res.schedule.fetch_end[i],
                    "compute_start": res.schedule.compute_start[i],
                    "compute_end": res.schedule.compute_end[i],
                } for i in range(res.schedule.n_layers)],
            },
            "ttft_sim": res.ttft_sim,
        },
        "tokens": tokens,
        "events": events,
        "comparison": comparison,
    }


def create_app(store_dir: Path | str, config: AppConfig | None = None,
               frontend_dir: Path | str | None = None) -> FastAPI:
    config = config or AppConfig()
    weights = init_weights(config.model)
    store = ChunkStore(store_dir, config.model, tier=config.tier)
    engine = FusionEngine(weights, store, cost=config.cost,
                          options=RunOptions(max_new=config.run.max_new))

    app = FastAPI(title="qcfuse demo service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    runs: OrderedDict[int, dict] = OrderedDict()
    state = {"next_run_id": 1, "runs_served": 0}
    run_lock = threading.Lock()

    @app.get("/api/chunks")
    def list_chunks():
        return [_chunk_summary(store, cid) for cid in store.chunk_ids()]

    @app.post("/api/chunks")
    def upload_chunks(payload: dict):
        name = str(payload.get("name", ""))
        text = payload.get("text", "")
        if not isinstance(text, str) or not text:
            raise HTTPException(400, "text must be a non-empty string")
        data = text.encode("utf-8")
        created = []
        try:
            for start in range(0, len(data), config.run.chunk_tokens):
                piece = list(data[start:start + config.run.chunk_tokens])
                before = store.manifest.cache_hits
                rec = store.precompute(weights, piece, config.run.anchor_ratio,
                                       source_name=name)
                summary = _chunk_summary(store, rec.chunk_id)
                summary["cache_hit"] = store.manifest.cache_hits > before
                created.append(summary)
        except FingerprintMismatch as exc:
            raise HTTPException(409, str(exc))
        return {"chunks": created}

    @app.post("/api/query")
    def run_query(payload: dict):
        query = payload.get("query", "")
        policy = payload.get("policy", "QCFuse")
        ratio = payload.get("ratio", 0.2)
        top_k = payload.get("top_k", config.run.top_k)
        explicit = payload.get("chunk_ids")
        compare_full = bool(payload.get("compare_full", False))

        if not isinstance(query, str) or not query:
            raise HTTPException(400, "query must be a non-empty string")
        if policy not in POLICIES:
            raise HTTPException(400, f"unknown policy {policy!r}")
        if not isinstance(ratio, (int, float)) or not (0.0 <= float(ratio) <= 1.0):
            raise HTTPException(400, "ratio must be in [0, 1]")
        ratio = float(ratio)
        if policy == "FullReuse" and ratio != 0.0:
            raise HTTPException(400, "FullReuse requires ratio = 0")
        if policy == "FullCompute" and ratio != 1.0:
            raise HTTPException(400, "FullCompute requires ratio = 1")
        if not isinstance(top_k, int) or top_k < 1:
            raise HTTPException(400, "top_k must be a positive integer")

        if explicit is not None:
            if not isinstance(explicit, list) or not explicit:
                raise HTTPException(400, "chunk_ids must be a non-empty list")
            missing = [c for c in explicit if c not in store]
            if missing:
                raise HTTPException(404, f"unknown chunk_ids: {missing}")
            chunk_ids = [str(c) for c in explicit]
            grams = byte_4grams(query.encode("utf-8"))
            ranked = {}
            for cid in chunk_ids:
                meta = store.load_meta(cid)
                text = bytes(int(t) & 0xFF for t in meta.token_ids)
                ranked[cid] = cosine(grams, byte_4grams(text))
        else:
            scored = retrieve_scored(store, query, top_k)
            if not scored:
                raise HTTPException(404, "store has no chunks; upload context first")
            chunk_ids = [cid for cid, _ in scored]
            ranked = dict(scored)
        retrieval = [{"chunk_id": cid, "score": float(ranked[cid])} for cid in chunk_ids]

        res = engine.run(policy, ratio, chunk_ids, query)
        fused = engine.assemble_context(chunk_ids)

        comparison = None
        if compare_full:
            full = engine.run("FullCompute", 1.0, chunk_ids, query)
            from qcfuse.metrics import logit_divergence, token_match_rate
            div, _ = logit_divergence(full.first_logits, res.first_logits)
            comparison = {
                "ttft_sim": full.ttft_sim,
                "n_computed": full.selection.n_selected,
                "token_match": token_match_rate(full.answer_tokens, res.answer_tokens,
                                                config.run.max_new),
                "logit_div": div,
            }

        request_echo = {"query": query, "policy": policy, "ratio": ratio,
                        "top_k": top_k, "chunk_ids": chunk_ids,
                        "compare_full": compare_full}
        with run_lock:
            run_id = state["next_run_id"]
            state["next_run_id"] += 1
            state["runs_served"] += 1
            runs[run_id] = _run_record(run_id, request_echo, chunk_ids, res,
                                       fused.token_ids, fused.chunk_index, comparison,
                                       retrieval)
            while len(runs) > MAX_RUN_LOG:
                runs.popitem(last=False)
        return {"run_id": run_id}

    def _get_run(run_id: int) -> dict:
        with run_lock:
            record = runs.get(run_id)
        if record is None:
            raise HTTPException(404, f"unknown run id {run_id}")
        return record

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: int):
        return _get_run(run_id)

    @app.get("/api/runs/{run_id}/events")
    def get_events(run_id: int, request: Request):
        record = _get_run(run_id)
        events = record["events"]
        stream = request.query_params.get("stream")
        if not stream:
            return {"run_id": run_id, "events": events}

        replay_ms = int(request.query_params.get("replay_ms", config.run.replay_ms))
        sse = stream == "sse"

        async def replay():
            for event in events:
                if replay_ms:
                    await asyncio.sleep(replay_ms / 1000.0)
                line = json.dumps(event, sort_keys=True)
                yield f"data: {line}\n\n" if sse else line + "\n"

        media = "text/event-stream" if sse else "application/x-ndjson"
        return StreamingResponse(replay(), media_type=media)

    @app.get("/api/metrics")
    def metrics():
        with run_lock:
            served = state["runs_served"]
        return {
            "cache_hits": store.manifest.cache_hits,
            "cache_misses": store.manifest.cache_misses,
            "layers_fetched": store.manifest.layers_fetched,
            "bytes_fetched": store.manifest.bytes_fetched,
            "runs_served": served,
            "store_bytes": store.store_bytes(),
            "config_fingerprint": store.fingerprint,
            "model": config.model.to_dict(),
        }

    @app.exception_handler(FingerprintMismatch)
    def fingerprint_handler(_request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
