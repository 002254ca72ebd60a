"""Fused-context assembly, query probing, token selection policies, and
layer-pipelined selective recomputation.

Layout convention: a fused context holds 1 + n_ctx KV rows per layer. Row 0
is a globally shared BOS computed once at position 0; context token rows sit
at absolute positions 1..n_ctx, so a context token's row index, absolute
position, and selection index are all the same number. Selection indices and
score arrays cover context tokens only (scores[i - 1] belongs to position i).

Policies:
  FullCompute  recompute everything (the accuracy ceiling, cost floor 0 reuse)
  FullReuse    recompute nothing
  Random       seeded uniform choice
  EPIC         static prefix of the sequence
  CacheBlend   layer-1 KV deviation ranking
  KVShare      layer-1 deviation scaled by attention received
  QCLast       context-free probe scored on last-layer keys
  QCAll        full-context probe, scores averaged over every layer
  QCFuse       anchor-prefix probe scored on the critical layer
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qcfuse import metrics as _metrics
from qcfuse.model import (
    BOS_ID,
    LayerKV,
    ModelWeights,
    PastKV,
    SplitMix64,
    _ff,
    _layer_norm,
    _masked_attention,
    _merge_heads,
    _split_heads,
    byte_tokens,
    decode_greedy,
    forward_full,
    forward_with_past,
    render_tokens,
    rope_rotate,
    rope_rotate_delta,
)
from qcfuse.pipeline import CostModel, ScheduleTrace, layer_times, policy_schedule
from qcfuse.store import ChunkStore

POLICIES = ("FullCompute", "FullReuse", "Random", "EPIC", "CacheBlend",
            "KVShare", "QCLast", "QCAll", "QCFuse")

# probe past composition per policy: stored anchors, the whole fused
# context, or nothing beyond BOS
PROBE_ANCHORS = "anchors"
PROBE_FULL = "full"
PROBE_NONE = "none"


@dataclass
class FusedContext:
    chunk_ids: list[str]
    token_ids: np.ndarray        # [n_ctx] context tokens in fused order, no BOS
    offsets: list[int]           # absolute start of each chunk; offsets[0] == 1
    layer_kv: list[LayerKV]      # [1 + n_ctx] rows each; row 0 is BOS
    n_ctx: int
    chunk_index: np.ndarray      # [n_ctx] chunk ordinal of each context token

    def key_positions(self) -> np.ndarray:
        return np.arange(0, self.n_ctx + 1, dtype=np.int64)

    def copy_kv(self) -> list[LayerKV]:
        return [kv.copy() for kv in self.layer_kv]


@dataclass
class QueryProbe:
    query_tokens: np.ndarray
    positions: np.ndarray                 # absolute, 1 + n_ctx ...
    queries: list[np.ndarray]             # per layer [n_query, n_heads, d_head]
    critical_attention: np.ndarray        # [n_heads, n_query, n_prefix] over the probe past
    prefix_positions: np.ndarray          # absolute positions of the probe past rows


@dataclass
class SelectionResult:
    policy: str
    ratio: float
    indices: np.ndarray   # ascending absolute context positions, subset of 1..n_ctx
    scores: np.ndarray    # [n_ctx]; zeros for score-free policies

    @property
    def n_selected(self) -> int:
        return int(self.indices.size)


@dataclass
class RecomputeTrace:
    updated_indices: np.ndarray            # constant across layers
    fetch_seconds: list[float]             # per layer
    compute_seconds: list[float]           # per layer
    events: list[dict] = field(default_factory=list)  # filled once scheduled


@dataclass
class OracleComparison:
    logit_div_max: float
    logit_kl: float
    token_match: float
    overlap: float


@dataclass
class RunResult:
    policy: str
    ratio: float
    answer_tokens: list[int]
    answer_text: str
    first_logits: np.ndarray
    selection: SelectionResult
    trace: RecomputeTrace
    schedule: ScheduleTrace
    ttft_sim: float
    comparison: OracleComparison | None = None


@dataclass
class RunOptions:
    max_new: int = 32
    query_agg: str = "mean"      # "mean" over query rows, or "last" row only
    selection_seed: int = 0      # seeds the Random policy
    epic_per_chunk: bool = False
    # QCAll scores its full-context probe at the critical layer by default;
    # True averages the per-layer scores instead, which on a random-weight
    # toy dilutes the signal badly (see decisions ledger)
    qcall_layer_average: bool = False


def top_n_positions(scores: np.ndarray, n: int) -> np.ndarray:
    """The n highest-scoring context positions (ascending, ties toward the
    lower index)."""
    order = np.argsort(-np.asarray(scores, np.float64), kind="stable")
    return np.sort(order[:n]) + 1


def select_topn(scores: np.ndarray, ratio: float, policy: str = "QCFuse") -> SelectionResult:
    """Top-N context positions by score; N = ceil(ratio * n_ctx), ties toward
    the lower index, ascending output."""
    if not (0.0 <= ratio <= 1.0):
        raise ValueError("ratio must be in [0, 1]")
    scores = np.asarray(scores, dtype=np.float64)
    n_ctx = scores.size
    n = math.ceil(ratio * n_ctx)
    order = np.argsort(-scores, kind="stable")
    indices = np.sort(order[:n]) + 1  # context positions are 1-based
    return SelectionResult(policy, ratio, indices.astype(np.int64), scores.astype(np.float32))


def epic_select(n_ctx: int, ratio: float, chunk_spans: list[tuple[int, int]] | None = None) -> SelectionResult:
    """Static prefix selection: the first N context positions.

    With ``chunk_spans`` the same static rule is applied per chunk instead of
    once per sequence.
    """
    if not (0.0 <= ratio <= 1.0):
        raise ValueError("ratio must be in [0, 1]")
    if chunk_spans is None:
        n = math.ceil(ratio * n_ctx)
        idx = np.arange(1, n + 1, dtype=np.int64)
    else:
        picks = []
        for start, length in chunk_spans:
            picks.extend(range(start, start + math.ceil(ratio * length)))
        idx = np.asarray(sorted(picks), dtype=np.int64)
    return SelectionResult("EPIC", ratio, idx, np.zeros(n_ctx, np.float32))


def random_select(seed: int, n_ctx: int, ratio: float) -> SelectionResult:
    """N positions drawn without replacement via a seeded Fisher-Yates shuffle."""
    if not (0.0 <= ratio <= 1.0):
        raise ValueError("ratio must be in [0, 1]")
    n = math.ceil(ratio * n_ctx)
    arr = list(range(1, n_ctx + 1))
    stream = SplitMix64(seed)
    for i in range(n_ctx - 1, 0, -1):
        j = stream.next_below(i + 1)
        arr[i], arr[j] = arr[j], arr[i]
    idx = np.asarray(sorted(arr[:n]), dtype=np.int64)
    return SelectionResult("Random", ratio, idx, np.zeros(n_ctx, np.float32))


def sparse_attention(q: np.ndarray, positions: np.ndarray, keys: np.ndarray,
                     values: np.ndarray, visible: np.ndarray) -> np.ndarray:
    """Attention for scattered query rows against a fused KV table.

    q: [m, H, D] rotated query rows at ``positions``; visible: [m, n_keys]
    bool mask, which must equal "key position <= row position" for causal
    use. Softmax is max-subtracted for stability. Rows with no visible key
    are rejected (BOS is always visible in real layouts).
    """
    if visible.shape != (q.shape[0], keys.shape[0]):
        raise ValueError("visibility mask shape mismatch")
    if not visible.any(axis=1).all():
        raise ValueError("every query row needs at least one visible key")
    out, _ = _masked_attention(q, keys, values, visible)
    return out


class FusionEngine:
    """Runs fused-context queries under every selection policy.

    Holds immutable weights and a chunk store; safe to share across threads
    for concurrent runs. The BOS KV row is computed once and reused by every
    fused context.
    """

    def __init__(self, weights: ModelWeights, store: ChunkStore,
                 cost: CostModel | None = None, options: RunOptions | None = None):
        self.weights = weights
        self.config = weights.config
        self.store = store
        self.cost = cost or CostModel(tier=store.tier)
        self.options = options or RunOptions()
        bos = forward_full(weights, [BOS_ID], 0)
        self._bos_kv = bos.layer_kv
        self._oracle_cache: dict[tuple, dict] = {}

    # ------------------------------------------------------------------
    # context assembly
    # ------------------------------------------------------------------

    def assemble_context(self, chunk_ids: list[str]) -> FusedContext:
        """Concatenate chunk KV behind the shared BOS row, re-rotating keys
        from base position 0 to each chunk's fused offset."""
        if not chunk_ids:
            raise ValueError("chunk list must be non-empty")
        records = [self.store.get_record(cid) for cid in chunk_ids]

        offsets = []
        pos = 1
        for rec in records:
            offsets.append(pos)
            pos += rec.n_tokens
        n_ctx = pos - 1

        layer_kv: list[LayerKV] = []
        for layer in range(1, self.config.n_layers + 1):
            k_parts = [self._bos_kv[layer - 1].keys]
            v_parts = [self._bos_kv[layer - 1].values]
            for rec, off in zip(records, offsets):
                kv, _ = self.store.fetch_layer(rec.chunk_id, layer)
                k_parts.append(rope_rotate_delta(kv.keys, off, self.config.rope_theta))
                v_parts.append(kv.values)
            layer_kv.append(LayerKV(np.concatenate(k_parts, axis=0),
                                    np.concatenate(v_parts, axis=0), 0))

        token_ids = np.concatenate([rec.token_ids for rec in records])
        chunk_index = np.concatenate([np.full(rec.n_tokens, i, np.int64)
                                      for i, rec in enumerate(records)])
        return FusedContext(list(chunk_ids), token_ids, offsets, layer_kv,
                            n_ctx, chunk_index)

    # ------------------------------------------------------------------
    # probing and scoring
    # ------------------------------------------------------------------

    def probe_query(self, query_tokens, fused: FusedContext,
                    mode: str = PROBE_ANCHORS) -> QueryProbe:
        """Forward the query over a lightweight prefix of the fused context.

        The prefix keeps BOS plus, per chunk, either its anchor rows
        (memory-resident), every row, or nothing. Anchor rows keep their
        original fused absolute positions; only the KV order is compacted.
        """
        toks = np.asarray(query_tokens, dtype=np.int64)
        if toks.size == 0:
            raise ValueError("query must be non-empty")

        past: list[PastKV] = []
        prefix_positions = None
        for layer in range(1, self.config.n_layers + 1):
            k_parts = [self._bos_kv[layer - 1].keys]
            v_parts = [self._bos_kv[layer - 1].values]
            pos_parts = [np.zeros(1, np.int64)]
            if mode == PROBE_FULL:
                kv = fused.layer_kv[layer - 1]
                k_parts, v_parts = [kv.keys], [kv.values]
                pos_parts = [fused.key_positions()]
            elif mode == PROBE_ANCHORS:
                for cid, off in zip(fused.chunk_ids, fused.offsets):
                    k, v, idx, _ = self.store.fetch_anchor_rows(cid, layer)
                    if idx.size == 0:
                        continue
                    k_parts.append(rope_rotate_delta(k, off, self.config.rope_theta))
                    v_parts.append(v)
                    pos_parts.append(off + idx)
            elif mode != PROBE_NONE:
                raise ValueError(f"unknown probe mode: {mode}")
            past.append(PastKV(np.concatenate(k_parts), np.concatenate(v_parts),
                               np.concatenate(pos_parts)))
            prefix_positions = past[-1].positions

        positions = np.arange(1 + fused.n_ctx, 1 + fused.n_ctx + toks.size, dtype=np.int64)
        trace = forward_with_past(self.weights, toks, past, positions,
                                  want_attn=True, want_q=True)
        crit = trace.attentions[self.config.critical_layer - 1]
        n_prefix = prefix_positions.size
        return QueryProbe(toks, positions, trace.queries,
                          crit[:, :, :n_prefix], prefix_positions)

    def score_against_keys(self, probe: QueryProbe, fused: FusedContext,
                           layer: int) -> np.ndarray:
        """Mean attention weight each context token receives from the probe's
        query rows, softmaxed over the n_ctx context keys of ``layer``."""
        q = probe.queries[layer - 1]
        keys = fused.layer_kv[layer - 1].keys[1:]  # context rows only
        if q.shape[1:] != keys.shape[1:]:
            raise ValueError("probe and fused context disagree on head shape")
        scale = 1.0 / math.sqrt(self.config.d_head)
        scores = np.einsum("mhd,nhd->hmn", q, keys) * scale
        weights = _softmax_last(scores)
        if self.options.query_agg == "last":
            weights = weights[:, -1:, :]
        return weights.mean(axis=(0, 1)).astype(np.float32)

    def score_critical(self, probe: QueryProbe, fused: FusedContext) -> np.ndarray:
        return self.score_against_keys(probe, fused, self.config.critical_layer)

    def oracle_importance(self, context_tokens, query_tokens) -> np.ndarray:
        """Ground-truth importance from an exact full forward over
        [BOS | context | query]: critical-layer query attention over context
        columns, same normalization and aggregation as probe scoring."""
        ctx = np.asarray(context_tokens, dtype=np.int64)
        qt = np.asarray(query_tokens, dtype=np.int64)
        full = forward_full(self.weights, np.concatenate([[BOS_ID], ctx, qt]),
                            0, want_q=True)
        q = full.queries[self.config.critical_layer - 1][1 + ctx.size:]
        keys = full.layer_kv[self.config.critical_layer - 1].keys[1:1 + ctx.size]
        scale = 1.0 / math.sqrt(self.config.d_head)
        scores = np.einsum("mhd,nhd->hmn", q, keys) * scale
        weights = _softmax_last(scores)
        if self.options.query_agg == "last":
            weights = weights[:, -1:, :]
        return weights.mean(axis=(0, 1)).astype(np.float32)

    # ------------------------------------------------------------------
    # selection policies
    # ------------------------------------------------------------------

    def _layer1_recompute_pass(self, fused: FusedContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Recompute layer 1 for every context token from raw embeddings.

        Returns (new K, new V, attention weights over [BOS | context]).
        Shared machinery of the deviation-ranking policies.
        """
        cfg = self.config
        lw = self.weights.layers[0]
        positions = np.arange(1, fused.n_ctx + 1, dtype=np.int64)
        x = self.weights.token_embedding[fused.token_ids]
        a = _layer_norm(x, lw.ln1_gain, lw.ln1_bias, cfg.ln_eps)
        q = rope_rotate(_split_heads(a @ lw.wq, cfg.n_heads, cfg.d_head), positions, cfg.rope_theta)
        k = rope_rotate(_split_heads(a @ lw.wk, cfg.n_heads, cfg.d_head), positions, cfg.rope_theta)
        v = _split_heads(a @ lw.wv, cfg.n_heads, cfg.d_head)

        keys = fused.layer_kv[0].keys.copy()
        values = fused.layer_kv[0].values.copy()
        keys[1:] = k
        values[1:] = v
        visible = fused.key_positions()[None, :] <= positions[:, None]
        _, attn = _masked_attention(q, keys, values, visible)
        return k, v, attn

    def _kv_deviation(self, fused: FusedContext, new_k: np.ndarray, new_v: np.ndarray) -> np.ndarray:
        old_k = fused.layer_kv[0].keys[1:]
        old_v = fused.layer_kv[0].values[1:]
        dk = np.linalg.norm((new_k - old_k).astype(np.float64), axis=2).sum(axis=1)
        dv = np.linalg.norm((new_v - old_v).astype(np.float64), axis=2).sum(axis=1)
        return (dk + dv).astype(np.float32)

    def cacheblend_select(self, fused: FusedContext, ratio: float) -> SelectionResult:
        new_k, new_v, _ = self._layer1_recompute_pass(fused)
        dev = self._kv_deviation(fused, new_k, new_v)
        sel = select_topn(dev, ratio, "CacheBlend")
        return sel

    def kvshare_select(self, fused: FusedContext, ratio: float) -> SelectionResult:
        new_k, new_v, attn = self._layer1_recompute_pass(fused)
        dev = self._kv_deviation(fused, new_k, new_v)
        received = attn[:, :, 1:].mean(axis=(0, 1))  # context columns only
        return select_topn(dev * received.astype(np.float32), ratio, "KVShare")

    def qcfuse_select(self, query_tokens, fused: FusedContext, ratio: float) -> SelectionResult:
        probe = self.probe_query(query_tokens, fused, PROBE_ANCHORS)
        sel = select_topn(self.score_critical(probe, fused), ratio, "QCFuse")
        return sel

    def qclast_select(self, query_tokens, fused: FusedContext, ratio: float) -> SelectionResult:
        probe = self.probe_query(query_tokens, fused, PROBE_NONE)
        scores = self.score_against_keys(probe, fused, self.config.n_layers)
        return select_topn(scores, ratio, "QCLast")

    def qcall_select(self, query_tokens, fused: FusedContext, ratio: float) -> SelectionResult:
        probe = self.probe_query(query_tokens, fused, PROBE_FULL)
        if self.options.qcall_layer_average:
            scores = np.mean([self.score_against_keys(probe, fused, layer)
                              for layer in range(1, self.config.n_layers + 1)], axis=0)
        else:
            scores = self.score_critical(probe, fused)
        return select_topn(scores, ratio, "QCAll")

    def select(self, policy: str, ratio: float, fused: FusedContext,
               query_tokens) -> SelectionResult:
        if policy not in POLICIES:
            raise ValueError(f"unknown policy: {policy}")
        n = fused.n_ctx
        if policy == "FullCompute":
            return SelectionResult(policy, 1.0, np.arange(1, n + 1, dtype=np.int64),
                                   np.zeros(n, np.float32))
        if policy == "FullReuse":
            return SelectionResult(policy, 0.0, np.zeros(0, np.int64),
                                   np.zeros(n, np.float32))
        if policy == "Random":
            return random_select(self.options.selection_seed, n, ratio)
        if policy == "EPIC":
            spans = None
            if self.options.epic_per_chunk:
                spans = [(off, (fused.offsets + [n + 1])[i + 1] - off)
                         for i, off in enumerate(fused.offsets)]
            return epic_select(n, ratio, spans)
        if policy == "CacheBlend":
            return self.cacheblend_select(fused, ratio)
        if policy == "KVShare":
            return self.kvshare_select(fused, ratio)
        if policy == "QCLast":
            return self.qclast_select(query_tokens, fused, ratio)
        if policy == "QCAll":
            return self.qcall_select(query_tokens, fused, ratio)
        return self.qcfuse_select(query_tokens, fused, ratio)

    # ------------------------------------------------------------------
    # recomputation
    # ------------------------------------------------------------------

    def recompute_selected(self, fused: FusedContext,
                           selection: SelectionResult) -> tuple[FusedContext, RecomputeTrace]:
        """Recompute the selected tokens layer by layer over the fused KV.

        Selected rows start from raw token embeddings; at each layer their
        fresh K/V replace the reused rows before attention, so selected
        tokens see each other's updates within the pass (causally). Rows
        outside the selection are untouched.
        """
        cfg = self.config
        sel = np.asarray(selection.indices, dtype=np.int64)
        if sel.size and (sel.min() < 1 or sel.max() > fused.n_ctx):
            raise ValueError("selection indices out of context range")
        new_layer_kv = fused.copy_kv()
        fetch_s, compute_s = [], []
        fetch, compute = layer_times(sel.size, fused.n_ctx, cfg, self.cost)

        if sel.size:
            x = self.weights.token_embedding[fused.token_ids[sel - 1]]
            positions = sel
            key_positions = fused.key_positions()
            visible = key_positions[None, :] <= positions[:, None]
            for layer in range(1, cfg.n_layers + 1):
                lw = self.weights.layers[layer - 1]
                a = _layer_norm(x, lw.ln1_gain, lw.ln1_bias, cfg.ln_eps)
                q = rope_rotate(_split_heads(a @ lw.wq, cfg.n_heads, cfg.d_head),
                                positions, cfg.rope_theta)
                k = rope_rotate(_split_heads(a @ lw.wk, cfg.n_heads, cfg.d_head),
                                positions, cfg.rope_theta)
                v = _split_heads(a @ lw.wv, cfg.n_heads, cfg.d_head)
                kv = new_layer_kv[layer - 1]
                kv.keys[sel] = k
                kv.values[sel] = v
                attn_out = sparse_attention(q, positions, kv.keys, kv.values, visible)
                x = x + _merge_heads(attn_out) @ lw.wo
                x = x + _ff(_layer_norm(x, lw.ln2_gain, lw.ln2_bias, cfg.ln_eps), lw)
                fetch_s.append(fetch)
                compute_s.append(compute)
        else:
            fetch_s = [fetch] * cfg.n_layers
            compute_s = [0.0] * cfg.n_layers  # no recompute pass runs at all

        updated = FusedContext(fused.chunk_ids, fused.token_ids, fused.offsets,
                               new_layer_kv, fused.n_ctx, fused.chunk_index)
        return updated, RecomputeTrace(sel, fetch_s, compute_s)

    # ------------------------------------------------------------------
    # end to end
    # ------------------------------------------------------------------

    def oracle_run(self, context_tokens, query_tokens, max_new: int | None = None) -> dict:
        """Pure full-computation reference: forward_full over
        [BOS | context | query] plus greedy decode and oracle importance."""
        max_new = max_new or self.options.max_new
        key = (np.asarray(context_tokens, np.int64).tobytes(),
               np.asarray(query_tokens, np.int64).tobytes(), max_new)
        cached = self._oracle_cache.get(key)
        if cached is not None:
            return cached
        ctx = np.asarray(context_tokens, dtype=np.int64)
        qt = np.asarray(query_tokens, dtype=np.int64)
        stream = np.concatenate([[BOS_ID], ctx, qt])
        trace = forward_full(self.weights, stream, 0)
        state = [PastKV.from_layer_kv(kv) for kv in trace.layer_kv]
        answer = decode_greedy(self.weights, state, trace.logits[-1], max_new)
        result = {
            "first_logits": trace.logits[-1],
            "answer_tokens": answer,
            "importance": self.oracle_importance(ctx, qt),
        }
        self._oracle_cache[key] = result
        return result

    def run(self, policy: str, ratio: float, chunk_ids: list[str], query,
            compare_oracle: bool = False, max_new: int | None = None) -> RunResult:
        """Assemble, select, recompute, answer; optionally score against the
        full-computation oracle."""
        if policy not in POLICIES:
            raise ValueError(f"unknown policy: {policy}")
        if not (0.0 <= ratio <= 1.0):
            raise ValueError("ratio must be in [0, 1]")
        max_new = max_new or self.options.max_new
        query_tokens = byte_tokens(query) if isinstance(query, (str, bytes)) else list(query)
        if not query_tokens:
            raise ValueError("query must be non-empty")

        fused = self.assemble_context(chunk_ids)
        selection = self.select(policy, ratio, fused, query_tokens)
        updated, trace = self.recompute_selected(fused, selection)

        past = [PastKV(kv.keys, kv.values, fused.key_positions())
                for kv in updated.layer_kv]
        positions = np.arange(1 + fused.n_ctx, 1 + fused.n_ctx + len(query_tokens))
        qtrace = forward_with_past(self.weights, query_tokens, past, positions)
        first_logits = qtrace.logits[-1]

        state = [PastKV(np.concatenate([past[li].keys, qtrace.layer_kv[li].keys]),
                        np.concatenate([past[li].values, qtrace.layer_kv[li].values]),
                        np.concatenate([past[li].positions, positions]))
                 for li in range(self.config.n_layers)]
        answer = decode_greedy(self.weights, state, first_logits, max_new)

        schedule = policy_schedule(policy, selection.n_selected, fused.n_ctx,
                                   len(query_tokens), self.config, self.cost)
        trace.events = _schedule_events(schedule)
        ttft = schedule.ttft + self.cost.decode_gamma

        comparison = None
        if compare_oracle:
            oracle = self.oracle_run(fused.token_ids, query_tokens, max_new)
            div, kl = _metrics.logit_divergence(oracle["first_logits"], first_logits)
            match = _metrics.token_match_rate(oracle["answer_tokens"], answer, max_new)
            oracle_top = top_n_positions(oracle["importance"], selection.n_selected)
            overlap = _metrics.selection_overlap(selection.indices, oracle_top)
            comparison = OracleComparison(div, kl, match, overlap)

        return RunResult(policy, selection.ratio, answer, render_tokens(answer),
                         first_logits, selection, trace, schedule, ttft, comparison)


def _softmax_last(scores: np.ndarray) -> np.ndarray:
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def _schedule_events(schedule: ScheduleTrace) -> list[dict]:
    events = []
    for i in range(schedule.n_layers):
        events.append({"kind": "fetch", "layer": i + 1,
                       "start": schedule.fetch_start[i], "end": schedule.fetch_end[i]})
        events.append({"kind": "compute", "layer": i + 1,
                       "start": schedule.compute_start[i], "end": schedule.compute_end[i]})
    events.sort(key=lambda e: (e["start"], e["layer"], e["kind"] == "compute"))
    return events
