"""Minimal deterministic decoder-only transformer with rotary positions.

The model is intentionally tiny and bit-reproducible: weights come from a
splitmix64 stream keyed by the config seed, all tensors are float32, and
every forward pass is a pure function of its inputs. Layer indices are
1-based everywhere in this package (lists are indexed with ``layer - 1``).

Rotary keys are stored post-rotation at the positions they were computed
at; :func:`rope_rotate_delta` shifts a stored key to a new absolute
position, which is what makes chunk-level cache reuse at arbitrary prompt
offsets exact for keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOS_ID = 256
EOS_ID = 257
PAD_ID = 258
VOCAB_SIZE = 259

WEIGHT_LOW = -0.05
WEIGHT_HIGH = 0.05

_MASK64 = (1 << 64) - 1
_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MIX1 = 0xBF58476D1CE4E5B9
_SM64_MIX2 = 0x94D049BB133111EB


def splitmix64_at(seed: int, steps: np.ndarray | int) -> np.ndarray:
    """Outputs of the splitmix64 stream keyed by ``seed`` at the given steps.

    Step 0 is the first output. Vectorized over ``steps`` using uint64
    wraparound, so bulk draws do not need a Python loop.
    """
    g = np.asarray(steps, dtype=np.uint64)
    with np.errstate(over="ignore"):  # wraparound mod 2**64 is the algorithm
        z = (np.uint64(seed & _MASK64) + (g + np.uint64(1)) * np.uint64(_SM64_GAMMA))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM64_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM64_MIX2)
        return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential splitmix64 stream (pure Python, for shuffles and seeds)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _SM64_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _SM64_MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM64_MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Draw in [0, n) by modulo reduction (bias is irrelevant here)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n


def uniform_from_u64(u64: np.ndarray) -> np.ndarray:
    """Map 64-bit outputs to float64 in [0, 1): top 53 bits times 2**-53."""
    return (np.asarray(u64, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 2
    d_model: int = 32
    d_head: int = 16
    d_ff: int = 64
    vocab_size: int = VOCAB_SIZE
    rope_theta: float = 10000.0
    ln_eps: float = 1e-5
    seed: int = 1234
    critical_layer: int | None = None  # 1-based; defaults to ceil(n_layers / 2)

    def __post_init__(self):
        if self.critical_layer is None:
            object.__setattr__(self, "critical_layer", math.ceil(self.n_layers / 2))
        self.validate()

    def validate(self) -> None:
        if self.d_model != self.n_heads * self.d_head:
            raise ValueError("d_model must equal n_heads * d_head")
        if self.n_layers < 4:
            raise ValueError("n_layers must be >= 4")
        if not (1 < self.critical_layer < self.n_layers):
            raise ValueError("critical_layer must satisfy 1 < critical_layer < n_layers")
        if self.vocab_size != VOCAB_SIZE:
            raise ValueError(f"vocab_size must be {VOCAB_SIZE} (256 bytes + BOS/EOS/PAD)")
        if self.d_head % 2 != 0:
            raise ValueError("d_head must be even for rotary pairs")
        if self.rope_theta <= 0 or self.ln_eps <= 0:
            raise ValueError("rope_theta and ln_eps must be positive")

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "d_head": self.d_head,
            "d_ff": self.d_ff,
            "vocab_size": self.vocab_size,
            "rope_theta": self.rope_theta,
            "ln_eps": self.ln_eps,
            "seed": self.seed,
            "critical_layer": self.critical_layer,
        }


@dataclass
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class ModelWeights:
    config: ModelConfig
    token_embedding: np.ndarray  # [vocab, d_model]; also the tied output projection
    layers: list[LayerWeights]
    ln_f_gain: np.ndarray
    ln_f_bias: np.ndarray


@dataclass
class LayerKV:
    """Per-layer keys/values of a contiguous token run.

    Keys are post-rotary, stored at the absolute positions they were
    computed at (token i sits at ``base_position + i``).
    """

    keys: np.ndarray    # [n_tokens, n_heads, d_head] float32
    values: np.ndarray  # [n_tokens, n_heads, d_head] float32
    base_position: int = 0

    @property
    def n_tokens(self) -> int:
        return self.keys.shape[0]

    def positions(self) -> np.ndarray:
        return np.arange(self.base_position, self.base_position + self.n_tokens, dtype=np.int64)

    def copy(self) -> "LayerKV":
        return LayerKV(self.keys.copy(), self.values.copy(), self.base_position)


@dataclass
class PastKV:
    """Injected past for :func:`forward_with_past`; rows may be non-contiguous."""

    keys: np.ndarray       # [n, n_heads, d_head]
    values: np.ndarray     # [n, n_heads, d_head]
    positions: np.ndarray  # [n] int64, absolute

    @classmethod
    def from_layer_kv(cls, kv: LayerKV) -> "PastKV":
        return cls(kv.keys, kv.values, kv.positions())


@dataclass
class ForwardTrace:
    logits: np.ndarray           # [n_tokens, vocab]
    layer_kv: list[LayerKV]      # KV of the *new* tokens, one entry per layer
    attentions: list[np.ndarray] | None = None  # per layer [n_heads, n_query, n_key]
    queries: list[np.ndarray] | None = None     # per layer [n_tokens, n_heads, d_head], post-rotary


def tokenize(text: bytes | str) -> list[int]:
    """BOS followed by one token per byte (byte value is the token id)."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    return [BOS_ID] + list(data)


def byte_tokens(text: bytes | str) -> list[int]:
    """Token ids of raw bytes, no BOS (chunk and query payloads)."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    return list(data)


def render_tokens(token_ids) -> str:
    """Printable rendering: bytes decoded as UTF-8 where possible, else escaped."""
    out = []
    buf = bytearray()

    def flush():
        if buf:
            out.append(buf.decode("utf-8", errors="backslashreplace"))
            buf.clear()

    for t in token_ids:
        t = int(t)
        if t < 256:
            if 32 <= t < 127 or t in (9, 10):
                buf.append(t)
            else:
                flush()
                out.append(f"\\x{t:02x}")
        else:
            flush()
            out.append({BOS_ID: "<bos>", EOS_ID: "<eos>", PAD_ID: "<pad>"}[t])
    flush()
    return "".join(out)


def init_weights(config: ModelConfig) -> ModelWeights:
    """Draw every random parameter from the splitmix64 stream keyed by the seed.

    Stream order (this order is part of the bit-exact contract):
    token_embedding row-major, then per layer wq, wk, wv, wo, w1, w2, each
    row-major. Each draw maps the top 53 bits to [0, 1) and then affinely to
    [-0.05, 0.05). Layer-norm gains are exactly 1, biases exactly 0, and the
    output projection is tied to the embedding, so none of them consume draws.
    """
    config.validate()
    d, h, dh, dff = config.d_model, config.n_heads, config.d_head, config.d_ff
    shapes = [(config.vocab_size, d)]
    for _ in range(config.n_layers):
        shapes += [(d, d), (d, d), (d, d), (d, d), (d, dff), (dff, d)]
    total = sum(r * c for r, c in shapes)
    u = uniform_from_u64(splitmix64_at(config.seed, np.arange(total, dtype=np.uint64)))
    flat = (WEIGHT_LOW + u * (WEIGHT_HIGH - WEIGHT_LOW)).astype(np.float32)

    arrays = []
    off = 0
    for r, c in shapes:
        arrays.append(flat[off:off + r * c].reshape(r, c))
        off += r * c

    ones = np.ones(d, dtype=np.float32)
    zeros = np.zeros(d, dtype=np.float32)
    layers = []
    for i in range(config.n_layers):
        wq, wk, wv, wo, w1, w2 = arrays[1 + 6 * i: 7 + 6 * i]
        layers.append(LayerWeights(wq, wk, wv, wo,
                                   ones.copy(), zeros.copy(), ones.copy(), zeros.copy(),
                                   w1, w2))
    return ModelWeights(config, arrays[0], layers, ones.copy(), zeros.copy())


# ---------------------------------------------------------------------------
# rotary positions
# ---------------------------------------------------------------------------

def _inv_freq(d_head: int, theta: float) -> np.ndarray:
    # one frequency per pair (x_{2j}, x_{2j+1}); float64 so large positions
    # (up to a few thousand) keep sub-1e-6 angle accuracy
    j = np.arange(d_head // 2, dtype=np.float64)
    return theta ** (-2.0 * j / d_head)


def rope_rotate(x: np.ndarray, positions: np.ndarray, theta: float) -> np.ndarray:
    """Rotate each adjacent pair of ``x`` [n, heads, d_head] by position * freq.

    Angles and the rotation itself are evaluated in float64, then cast back
    to float32; this keeps re-rotation composition errors near one float32 ulp.
    """
    n, _, dh = x.shape
    ang = np.asarray(positions, dtype=np.float64)[:, None] * _inv_freq(dh, theta)[None, :]
    cos = np.cos(ang)[:, None, :]  # [n, 1, dh/2]
    sin = np.sin(ang)[:, None, :]
    x64 = x.astype(np.float64)
    even, odd = x64[..., 0::2], x64[..., 1::2]
    out = np.empty_like(x64)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out.astype(np.float32)


def rope_rotate_delta(x: np.ndarray, delta: int, theta: float) -> np.ndarray:
    """Shift stored keys [n, heads, d_head] by ``delta`` positions (all rows equally)."""
    n = x.shape[0]
    return rope_rotate(x, np.full(n, delta, dtype=np.int64), theta)


def rope_rotate_key(key_vector: np.ndarray, delta: int, theta: float = 10000.0) -> np.ndarray:
    """Rotate a single [d_head] key by ``delta`` positions."""
    v = np.asarray(key_vector, dtype=np.float32)[None, None, :]
    return rope_rotate_delta(v, delta, theta)[0, 0]


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def _layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return ((x - mean) / np.sqrt(var + eps)) * gain + bias


def _split_heads(x: np.ndarray, n_heads: int, d_head: int) -> np.ndarray:
    return x.reshape(x.shape[0], n_heads, d_head)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis; -inf marks masked keys."""
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return (e / e.sum(axis=-1, keepdims=True)).astype(np.float32)


def _masked_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                      mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled dot-product attention.

    q: [m, H, D], k/v: [n, H, D], mask: [m, n] bool (True = visible).
    Returns (output [m, H, D], weights [H, m, n]).
    """
    d_head = q.shape[-1]
    scores = np.einsum("mhd,nhd->hmn", q, k) / np.float32(math.sqrt(d_head))
    scores = np.where(mask[None, :, :], scores, np.float32(-np.inf))
    weights = _softmax_rows(scores)
    out = np.einsum("hmn,nhd->mhd", weights, v).astype(np.float32)
    return out, weights


def _ff(x: np.ndarray, lw: LayerWeights) -> np.ndarray:
    return np.maximum(x @ lw.w1, np.float32(0.0)) @ lw.w2


def _forward(weights: ModelWeights, tokens: np.ndarray, positions: np.ndarray,
             past: list[PastKV] | None,
             want_attn: bool, want_q: bool) -> ForwardTrace:
    cfg = weights.config
    x = weights.token_embedding[tokens]
    n = len(tokens)

    new_kv: list[LayerKV] = []
    attns: list[np.ndarray] = []
    queries: list[np.ndarray] = []

    self_mask = positions[None, :] <= positions[:, None]  # [n, n]

    for li in range(cfg.n_layers):
        lw = weights.layers[li]
        a = _layer_norm(x, lw.ln1_gain, lw.ln1_bias, cfg.ln_eps)
        q = rope_rotate(_split_heads(a @ lw.wq, cfg.n_heads, cfg.d_head), positions, cfg.rope_theta)
        k = rope_rotate(_split_heads(a @ lw.wk, cfg.n_heads, cfg.d_head), positions, cfg.rope_theta)
        v = _split_heads(a @ lw.wv, cfg.n_heads, cfg.d_head)

        if past is not None:
            pk = past[li]
            k_all = np.concatenate([pk.keys, k], axis=0)
            v_all = np.concatenate([pk.values, v], axis=0)
            past_mask = np.ones((n, pk.keys.shape[0]), dtype=bool)  # past strictly precedes
            mask = np.concatenate([past_mask, self_mask], axis=1)
        else:
            k_all, v_all, mask = k, v, self_mask

        attn_out, attn_w = _masked_attention(q, k_all, v_all, mask)
        x = x + _merge_heads(attn_out) @ lw.wo
        x = x + _ff(_layer_norm(x, lw.ln2_gain, lw.ln2_bias, cfg.ln_eps), lw)

        new_kv.append(LayerKV(k, v, int(positions[0])))
        if want_attn:
            attns.append(attn_w)
        if want_q:
            queries.append(q)

    x = _layer_norm(x, weights.ln_f_gain, weights.ln_f_bias, cfg.ln_eps)
    logits = x @ weights.token_embedding.T
    return ForwardTrace(logits, new_kv,
                        attns if want_attn else None,
                        queries if want_q else None)


def forward_full(weights: ModelWeights, tokens, start_position: int = 0,
                 want_attn: bool = False, want_q: bool = False) -> ForwardTrace:
    """Full causal forward over ``tokens`` at absolute positions start_position..+n-1."""
    toks = np.asarray(tokens, dtype=np.int64)
    if toks.size == 0:
        raise ValueError("tokens must be non-empty")
    if start_position < 0:
        raise ValueError("start_position must be >= 0")
    positions = np.arange(start_position, start_position + toks.size, dtype=np.int64)
    return _forward(weights, toks, positions, None, want_attn, want_q)


def forward_with_past(weights: ModelWeights, tokens, past: list[PastKV],
                      token_positions, want_attn: bool = False,
                      want_q: bool = False) -> ForwardTrace:
    """Forward new tokens attending to an injected per-layer past.

    ``token_positions`` must be contiguous ascending and strictly greater
    than every past position.
    """
    toks = np.asarray(tokens, dtype=np.int64)
    pos = np.asarray(token_positions, dtype=np.int64)
    if toks.size == 0:
        raise ValueError("tokens must be non-empty")
    if toks.size != pos.size:
        raise ValueError("tokens and token_positions length mismatch")
    if toks.size > 1 and not np.all(np.diff(pos) == 1):
        raise ValueError("token_positions must be contiguous ascending")
    if len(past) != weights.config.n_layers:
        raise ValueError("past must have one entry per layer")
    for pk in past:
        if pk.positions.size and pos.min() <= int(pk.positions.max()):
            raise ValueError("token positions overlap injected past positions")
    return _forward(weights, toks, pos, past, want_attn, want_q)


def empty_past(config: ModelConfig) -> list[PastKV]:
    shape = (0, config.n_heads, config.d_head)
    return [PastKV(np.zeros(shape, np.float32), np.zeros(shape, np.float32),
                   np.zeros(0, np.int64)) for _ in range(config.n_layers)]


def decode_greedy(weights: ModelWeights, state: list[PastKV], first_logits: np.ndarray,
                  max_new: int = 32) -> list[int]:
    """Greedy argmax decoding from an existing KV state.

    ``state`` covers every already-processed token; ``first_logits`` is the
    next-token distribution at the last processed position. Ties break toward
    the lower token id (argmax first occurrence). The caller's arrays are not
    mutated. Stops after emitting EOS or ``max_new`` tokens.
    """
    if max_new < 1:
        raise ValueError("max_new must be >= 1")
    keys = [pk.keys for pk in state]
    values = [pk.values for pk in state]
    positions = [pk.positions for pk in state]
    next_pos = int(max(int(p.max()) for p in positions if p.size)) + 1

    out: list[int] = []
    logits = first_logits
    for step in range(max_new):
        tok = int(np.argmax(logits))
        out.append(tok)
        if tok == EOS_ID or step == max_new - 1:
            break
        past = [PastKV(keys[li], values[li], positions[li])
                for li in range(weights.config.n_layers)]
        trace = forward_with_past(weights, [tok], past, [next_pos])
        for li, kv in enumerate(trace.layer_kv):
            keys[li] = np.concatenate([keys[li], kv.keys], axis=0)
            values[li] = np.concatenate([values[li], kv.values], axis=0)
            positions[li] = np.concatenate([positions[li], np.array([next_pos], np.int64)])
        logits = trace.logits[-1]
        next_pos += 1
    return out
