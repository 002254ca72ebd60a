"""Virtual-clock scheduler for the fetch/compute overlap of selective
recomputation, plus the per-policy pre-selection cost model.

All times are simulated seconds from a declared cost model; nothing here
measures wall clock. The pipelined schedule overlaps the single SSD fetch
channel with per-layer recompute: while layer i computes, layer i+1's KV
streams in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from qcfuse.model import ModelConfig
from qcfuse.store import TierConfig, layer_kv_bytes


@dataclass
class CostModel:
    """Declared coefficients, not measurements.

    compute_alpha scales with selected-row attention work
    (n_sel * n_ctx * n_heads * d_head); compute_beta is the fixed per-layer
    overhead; decode_gamma is one generated-token forward.
    """

    compute_alpha: float = 1e-9
    compute_beta: float = 1e-4
    decode_gamma: float = 1e-3
    tier: TierConfig = field(default_factory=TierConfig)

    def __post_init__(self):
        if min(self.compute_alpha, self.compute_beta, self.decode_gamma) < 0:
            raise ValueError("cost coefficients must be >= 0")


@dataclass
class ScheduleTrace:
    """Per-layer intervals on the virtual clock.

    ``ttft`` here is the core prefill time (compute_end of the last layer);
    the caller adds the first decode step cost on top.
    """

    pre_phase: float
    fetch_start: list[float]
    fetch_end: list[float]
    compute_start: list[float]
    compute_end: list[float]
    ttft: float

    @property
    def n_layers(self) -> int:
        return len(self.fetch_start)


def layer_times(n_sel: int, n_ctx: int, config: ModelConfig, cost: CostModel) -> tuple[float, float]:
    """(fetch_seconds, compute_seconds) of one layer at the given widths."""
    fetch = cost.tier.fetch_seconds(layer_kv_bytes(n_ctx, config.n_heads, config.d_head))
    compute = cost.compute_alpha * n_sel * n_ctx * config.n_heads * config.d_head + cost.compute_beta
    return fetch, compute


def schedule_pipelined(fetch: list[float], compute: list[float], pre_phase: float = 0.0) -> ScheduleTrace:
    """Overlap a single serialized fetch channel with layer-by-layer compute.

    fetch_end[1] = pre + fetch[1]; fetches are back to back; layer i's
    compute starts once both the previous compute and its own fetch are done.
    """
    if len(fetch) != len(compute):
        raise ValueError("fetch and compute must have equal length")
    _check_nonnegative(fetch, compute, pre_phase)
    fs, fe, cs, ce = [], [], [], []
    t_fetch = pre_phase
    t_compute = pre_phase
    for f, c in zip(fetch, compute):
        fs.append(t_fetch)
        t_fetch += f
        fe.append(t_fetch)
        start = max(t_compute, t_fetch)
        cs.append(start)
        t_compute = start + c
        ce.append(t_compute)
    ttft = ce[-1] if ce else pre_phase
    return ScheduleTrace(pre_phase, fs, fe, cs, ce, ttft)


def schedule_sequential(fetch: list[float], compute: list[float], pre_phase: float = 0.0) -> ScheduleTrace:
    """No overlap: every fetch completes before its layer computes."""
    if len(fetch) != len(compute):
        raise ValueError("fetch and compute must have equal length")
    _check_nonnegative(fetch, compute, pre_phase)
    fs, fe, cs, ce = [], [], [], []
    t = pre_phase
    for f, c in zip(fetch, compute):
        fs.append(t)
        t += f
        fe.append(t)
        cs.append(t)
        t += c
        ce.append(t)
    ttft = ce[-1] if ce else pre_phase
    return ScheduleTrace(pre_phase, fs, fe, cs, ce, ttft)


def _check_nonnegative(fetch, compute, pre_phase):
    if pre_phase < 0 or any(f < 0 for f in fetch) or any(c < 0 for c in compute):
        raise ValueError("durations must be >= 0")


def policy_prephase(policy: str, n_ctx: int, n_query: int,
                    config: ModelConfig, cost: CostModel) -> float:
    """Selection cost paid before the recompute pipeline starts.

    The query-probing policies pay a probe forward (same alpha law with
    n_sel = n_query) plus a keys-only fetch of their scoring layer; anchors
    are memory-resident so the anchor prefix itself is free. The
    deviation-based policies pay a full layer-1 KV fetch plus a full-width
    layer-1 compute. The all-layer prober must materialize every layer's KV
    up front, which is exactly what breaks its pipelining.
    """
    probe_compute = cost.compute_alpha * n_query * n_ctx * config.n_heads * config.d_head + cost.compute_beta
    keys_only_fetch = cost.tier.fetch_seconds(
        layer_kv_bytes(n_ctx, config.n_heads, config.d_head) // 2)
    full_fetch = cost.tier.fetch_seconds(
        layer_kv_bytes(n_ctx, config.n_heads, config.d_head))
    full_width_compute = cost.compute_alpha * n_ctx * n_ctx * config.n_heads * config.d_head + cost.compute_beta

    if policy in ("FullCompute", "FullReuse", "EPIC", "Random"):
        return 0.0
    if policy in ("QCFuse", "QCLast"):
        return probe_compute + keys_only_fetch
    if policy == "QCAll":
        return config.n_layers * full_fetch
    if policy in ("CacheBlend", "KVShare"):
        return full_fetch + full_width_compute
    raise ValueError(f"unknown policy: {policy}")


def policy_schedule(policy: str, n_sel: int, n_ctx: int, n_query: int,
                    config: ModelConfig, cost: CostModel) -> ScheduleTrace:
    """Full prefill schedule for one policy at the given selection width."""
    layers = config.n_layers
    fetch_full, compute_sel = layer_times(n_sel, n_ctx, config, cost)
    pre = policy_prephase(policy, n_ctx, n_query, config, cost)

    if policy == "FullCompute":
        # nothing is reused: no fetches, every layer computes at full width
        _, compute_full = layer_times(n_ctx, n_ctx, config, cost)
        return schedule_pipelined([0.0] * layers, [compute_full] * layers, 0.0)
    if policy == "FullReuse":
        # no recompute passes at all; KV still streams in for decoding
        return schedule_pipelined([fetch_full] * layers, [0.0] * layers, 0.0)
    if policy == "QCAll":
        # every layer is already resident after the pre-phase materialization
        return schedule_pipelined([0.0] * layers, [compute_sel] * layers, pre)
    return schedule_pipelined([fetch_full] * layers, [compute_sel] * layers, pre)
