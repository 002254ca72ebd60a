"""Benchmark grid over policies and recomputation ratios, with oracle
comparison metrics, JSON/CSV emission, and critical-layer calibration.

Outputs are bit-reproducible: the virtual clock and seeded weights make the
rows deterministic, and the metadata timestamp honors SOURCE_DATE_EPOCH so a
rerun emits byte-identical files.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from qcfuse.cases import retrieve
from qcfuse.fusion import PROBE_ANCHORS, PROBE_FULL, FusionEngine, top_n_positions
from qcfuse.metrics import selection_overlap
from qcfuse.model import byte_tokens

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5)
BENCH_FIELDS = ("policy", "ratio", "ttft_sim", "logit_div_max", "logit_kl",
                "token_match", "overlap", "n_ctx", "n_sel")


@dataclass
class BenchRow:
    policy: str
    ratio: float
    ttft_sim: float
    logit_div_max: float
    logit_kl: float
    token_match: float
    overlap: float
    n_ctx: float
    n_sel: float


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return _dt.datetime.fromtimestamp(t, _dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def run_benchmark(engine: FusionEngine, queries: list[str], policies: list[str],
                  ratios: list[float] | None = None, top_k: int = 4,
                  progress=None) -> dict:
    """Run every (case, policy, ratio) combination and aggregate per-cell means.

    The Random policy is reseeded per case so its rows are averages over
    distinct draws, still fully reproducible.
    """
    ratios = list(ratios if ratios is not None else DEFAULT_RATIOS)
    cells: dict[tuple[str, float], list[dict]] = {
        (p, r): [] for p in policies for r in ratios}

    for case_idx, query in enumerate(queries):
        chunk_ids = retrieve(engine.store, query, top_k)
        if not chunk_ids:
            raise ValueError("store has no chunks to retrieve")
        engine.options.selection_seed = case_idx
        for policy in policies:
            for ratio in ratios:
                res = engine.run(policy, ratio, chunk_ids, query, compare_oracle=True)
                c = res.comparison
                cells[(policy, ratio)].append({
                    "ttft_sim": res.ttft_sim,
                    "logit_div_max": c.logit_div_max,
                    "logit_kl": c.logit_kl,
                    "token_match": c.token_match,
                    "overlap": c.overlap,
                    "n_ctx": len(res.selection.scores),
                    "n_sel": res.selection.n_selected,
                })
        if progress:
            progress(case_idx + 1, len(queries))

    rows = []
    for policy in policies:
        for ratio in ratios:
            runs = cells[(policy, ratio)]
            rows.append(BenchRow(
                policy=policy, ratio=ratio,
                **{k: float(np.mean([r[k] for r in runs]))
                   for k in ("ttft_sim", "logit_div_max", "logit_kl",
                             "token_match", "overlap", "n_ctx", "n_sel")}))
    return {
        "meta": {
            "fingerprint": engine.store.fingerprint,
            "seed": engine.config.seed,
            "timestamp": _timestamp(),
            "cases": len(queries),
            "policies": list(policies),
            "ratios": ratios,
            "n_runs": len(queries) * len(policies) * len(ratios),
        },
        "rows": [asdict(r) for r in rows],
    }


def write_json(report: dict, path: Path | str) -> None:
    Path(path).write_text(json.dumps(report, indent=1) + "\n")


def write_csv(report: dict, path: Path | str) -> None:
    """Same values as the JSON rows; floats rendered with repr round-tripping."""
    lines = [",".join(BENCH_FIELDS)]
    for row in report["rows"]:
        lines.append(",".join(
            row["policy"] if f == "policy" else repr(row[f]) for f in BENCH_FIELDS))
    Path(path).write_text("\n".join(lines) + "\n")


def calibrate_layer(engine: FusionEngine, queries: list[str], ratio: float = 0.2,
                    top_k: int = 4) -> dict:
    """Pick the probing layer whose anchor-probe Top-N tracks the full-probe
    Top-N best, over candidate layers 2..n_layers-1; ties toward the middle.
    """
    cfg = engine.config
    candidates = list(range(2, cfg.n_layers))
    overlaps: dict[int, list[float]] = {layer: [] for layer in candidates}

    for query in queries:
        chunk_ids = retrieve(engine.store, query, top_k)
        fused = engine.assemble_context(chunk_ids)
        qtoks = byte_tokens(query)
        anchor = engine.probe_query(qtoks, fused, PROBE_ANCHORS)
        full = engine.probe_query(qtoks, fused, PROBE_FULL)
        n = int(np.ceil(ratio * fused.n_ctx))
        for layer in candidates:
            a = top_n_positions(engine.score_against_keys(anchor, fused, layer), n)
            b = top_n_positions(engine.score_against_keys(full, fused, layer), n)
            overlaps[layer].append(selection_overlap(a, b))

    means = {layer: float(np.mean(v)) for layer, v in overlaps.items()}
    middle = int(np.ceil(cfg.n_layers / 2))
    best = max(means.values())
    tied = [layer for layer, m in means.items() if abs(m - best) < 1e-12]
    recommended = min(tied, key=lambda layer: (abs(layer - middle), layer))
    return {"recommended": recommended, "mean_overlap": means}
