"""Content-hashed chunk KV persistence with anchors and a simulated SSD tier.

Chunks are cached standalone: their KV is computed at base position 0 with
no BOS, so a chunk's cache is valid at any prompt offset after key
re-rotation. Files live under ``<root>/<first 2 hex>/<chunk_id>.qcfk`` next
to a human-readable ``manifest.txt``. Fetch latency is simulated on a
virtual clock; nothing here sleeps unless given a real-time clock.

File format (all little-endian):
  magic "QCFK" | u16 version=1 | 32-byte config fingerprint |
  u32 n_tokens | u32 n_layers | u32 n_heads | u32 d_head |
  per layer: K block then V block, f32 row-major [token][head][dim] |
  key_norms f32[n_tokens] | u32 anchor_count | u32 anchor_indices[...] |
  u32 token_ids[n_tokens] | u32 name_len | source_name utf-8 bytes
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qcfuse.model import LayerKV, ModelConfig, ModelWeights, forward_full

MAGIC = b"QCFK"
VERSION = 1
HEADER_SIZE = len(MAGIC) + 2 + 32 + 4 * 4

DEFAULT_ANCHOR_RATIO = 0.05


class StoreError(Exception):
    pass


class FingerprintMismatch(StoreError):
    """Store content was produced under a different model config."""


def config_fingerprint(config: ModelConfig) -> str:
    """Hex SHA-256 over the canonical key=value rendering of the config."""
    canon = "\n".join(f"{k}={v!r}" for k, v in sorted(config.to_dict().items()))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def chunk_hash(token_ids) -> str:
    """SHA-256 (hex) of the token ids encoded as 4-byte little-endian unsigned ints."""
    h = hashlib.sha256()
    h.update(np.asarray(token_ids, dtype="<u4").tobytes())
    return h.hexdigest()


def extract_anchors(key_norms, anchor_ratio: float) -> np.ndarray:
    """Indices of the ceil(ratio * n) largest norms, ties toward the lower
    index, returned ascending."""
    norms = np.asarray(key_norms, dtype=np.float64)
    if norms.size == 0:
        raise ValueError("key_norms must be non-empty")
    if not (0.0 < anchor_ratio <= 1.0):
        raise ValueError("anchor_ratio must be in (0, 1]")
    count = math.ceil(anchor_ratio * norms.size)
    order = np.argsort(-norms, kind="stable")  # stable: equal norms keep index order
    return np.sort(order[:count]).astype(np.int64)


@dataclass
class TierConfig:
    """Two-tier storage model: anchors resident in memory, full KV on a
    simulated SSD with affine fetch latency."""

    ssd_base_latency: float = 5e-5   # simulated seconds per fetch
    ssd_bandwidth: float = 1e8       # simulated bytes per second
    anchors_resident: bool = True

    def __post_init__(self):
        if self.ssd_base_latency < 0 or self.ssd_bandwidth <= 0:
            raise ValueError("ssd_base_latency must be >= 0 and ssd_bandwidth > 0")

    def fetch_seconds(self, n_bytes: int) -> float:
        return self.ssd_base_latency + n_bytes / self.ssd_bandwidth


@dataclass
class ChunkRecord:
    chunk_id: str
    token_ids: np.ndarray          # int64, no BOS
    layer_kv: list[LayerKV]        # base_position 0
    key_norms: np.ndarray          # [n_tokens] float32
    anchor_indices: np.ndarray     # ascending int64
    source_name: str = ""

    @property
    def n_tokens(self) -> int:
        return int(self.token_ids.size)


class VirtualClock:
    """Deterministic simulated clock; advance() never sleeps."""

    def __init__(self):
        self.now = 0.0

    def advance(self, seconds: float) -> None:
        self.now += seconds


class RealTimeClock(VirtualClock):
    """Live-demo clock: advancing actually sleeps the simulated duration."""

    def advance(self, seconds: float) -> None:
        time.sleep(seconds)
        self.now += seconds


def layer_kv_bytes(n_tokens: int, n_heads: int, d_head: int) -> int:
    """On-disk/wire size of one layer's K+V payload."""
    return 2 * n_tokens * n_heads * d_head * 4


def chunk_file_size(n_tokens: int, n_layers: int, n_heads: int, d_head: int,
                    n_anchors: int, name_bytes: int) -> int:
    """Exact size of a .qcfk file, from the format definition."""
    kv = n_layers * layer_kv_bytes(n_tokens, n_heads, d_head)
    meta = 4 * n_tokens + 4 + 4 * n_anchors + 4 * n_tokens + 4 + name_bytes
    return HEADER_SIZE + kv + meta


def persist_chunk(record: ChunkRecord, root: Path, fingerprint: str) -> Path:
    """Write a chunk record; returns the file path. Bit-exact round trip."""
    path = chunk_path(root, record.chunk_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = record.n_tokens
    n_layers = len(record.layer_kv)
    n_heads, d_head = record.layer_kv[0].keys.shape[1:]
    name = record.source_name.encode("utf-8")

    parts = [MAGIC, struct.pack("<H", VERSION), bytes.fromhex(fingerprint),
             struct.pack("<IIII", n, n_layers, n_heads, d_head)]
    for kv in record.layer_kv:
        parts.append(np.ascontiguousarray(kv.keys, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(kv.values, dtype="<f4").tobytes())
    parts.append(np.asarray(record.key_norms, dtype="<f4").tobytes())
    parts.append(struct.pack("<I", len(record.anchor_indices)))
    parts.append(np.asarray(record.anchor_indices, dtype="<u4").tobytes())
    parts.append(np.asarray(record.token_ids, dtype="<u4").tobytes())
    parts.append(struct.pack("<I", len(name)))
    parts.append(name)
    path.write_bytes(b"".join(parts))
    return path


def load_chunk(path: Path, expect_fingerprint: str | None = None,
               with_tensors: bool = True) -> ChunkRecord:
    """Read a chunk file; with_tensors=False skips the KV payload."""
    raw = path.read_bytes()
    if len(raw) < HEADER_SIZE:
        raise StoreError(f"truncated chunk file: {path}")
    if raw[:4] != MAGIC:
        raise StoreError(f"bad magic in chunk file: {path}")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != VERSION:
        raise StoreError(f"unsupported chunk version {version}: {path}")
    fp = raw[6:38].hex()
    if expect_fingerprint is not None and fp != expect_fingerprint:
        raise FingerprintMismatch(
            f"chunk {path.name} was produced under config {fp[:12]}..., "
            f"store expects {expect_fingerprint[:12]}...")
    n, n_layers, n_heads, d_head = struct.unpack_from("<IIII", raw, 38)

    # smallest well-formed file has zero anchors and an empty name
    if len(raw) < chunk_file_size(n, n_layers, n_heads, d_head, 0, 0):
        raise StoreError(f"truncated chunk file: {path}")

    off = HEADER_SIZE
    block = n * n_heads * d_head * 4
    layer_kv: list[LayerKV] = []
    if with_tensors:
        for _ in range(n_layers):
            k = np.frombuffer(raw, "<f4", n * n_heads * d_head, off).reshape(n, n_heads, d_head)
            v = np.frombuffer(raw, "<f4", n * n_heads * d_head, off + block).reshape(n, n_heads, d_head)
            layer_kv.append(LayerKV(k.copy(), v.copy(), 0))
            off += 2 * block
    else:
        off += n_layers * 2 * block
    key_norms = np.frombuffer(raw, "<f4", n, off).copy()
    off += 4 * n
    (n_anchors,) = struct.unpack_from("<I", raw, off)
    off += 4
    anchors = np.frombuffer(raw, "<u4", n_anchors, off).astype(np.int64)
    off += 4 * n_anchors
    token_ids = np.frombuffer(raw, "<u4", n, off).astype(np.int64)
    off += 4 * n
    (name_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    if off + name_len != len(raw):
        raise StoreError(f"truncated or oversized chunk file: {path}")
    name = raw[off:off + name_len].decode("utf-8")
    return ChunkRecord(chunk_hash(token_ids), token_ids, layer_kv, key_norms, anchors, name)


def chunk_path(root: Path, chunk_id: str) -> Path:
    return Path(root) / chunk_id[:2] / f"{chunk_id}.qcfk"


@dataclass
class ManifestEntry:
    path: str
    n_tokens: int
    n_anchors: int
    source_name: str = ""


class Manifest:
    """Human-readable key=value manifest; chunk lines are tab-separated."""

    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        self.chunks: dict[str, ManifestEntry] = {}
        self.cache_hits = 0
        self.cache_misses = 0
        self.layers_fetched = 0
        self.bytes_fetched = 0

    def dumps(self) -> str:
        lines = [
            "# qcfuse chunk store manifest",
            f"version = {VERSION}",
            f"fingerprint = {self.fingerprint}",
            f"cache_hits = {self.cache_hits}",
            f"cache_misses = {self.cache_misses}",
            f"layers_fetched = {self.layers_fetched}",
            f"bytes_fetched = {self.bytes_fetched}",
        ]
        for cid in sorted(self.chunks):
            e = self.chunks[cid]
            lines.append(f"chunk {cid} = {e.path}\t{e.n_tokens}\t{e.n_anchors}\t{e.source_name}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Manifest":
        m = cls("")
        for line in text.splitlines():
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            key, _, value = line.partition(" = ")
            if key == "fingerprint":
                m.fingerprint = value
            elif key in ("cache_hits", "cache_misses", "layers_fetched", "bytes_fetched"):
                setattr(m, key, int(value))
            elif key.startswith("chunk "):
                cid = key.split(" ", 1)[1]
                path, n_tokens, n_anchors, name = value.split("\t", 3)
                m.chunks[cid] = ManifestEntry(path, int(n_tokens), int(n_anchors), name)
        return m


class ChunkStore:
    """Chunk-level KV store bound to one model config.

    Reads are safe to share across threads; precompute/persist serialize on
    an internal lock. Opening a directory whose manifest was written under a
    different config fingerprint raises :class:`FingerprintMismatch`.
    """

    def __init__(self, root: Path | str, config: ModelConfig,
                 tier: TierConfig | None = None, clock: VirtualClock | None = None):
        self.root = Path(root)
        self.config = config
        self.tier = tier or TierConfig()
        self.clock = clock
        self.fingerprint = config_fingerprint(config)
        self._lock = threading.Lock()
        self._cache: dict[str, ChunkRecord] = {}

        self.root.mkdir(parents=True, exist_ok=True)
        mpath = self.root / "manifest.txt"
        if mpath.exists():
            self.manifest = Manifest.loads(mpath.read_text())
            if self.manifest.fingerprint != self.fingerprint:
                raise FingerprintMismatch(
                    f"store at {self.root} belongs to config "
                    f"{self.manifest.fingerprint[:12]}..., not {self.fingerprint[:12]}...")
        else:
            self.manifest = Manifest(self.fingerprint)
            self.flush()

    # -- bookkeeping --------------------------------------------------------

    def flush(self) -> None:
        (self.root / "manifest.txt").write_text(self.manifest.dumps())

    def chunk_ids(self) -> list[str]:
        return sorted(self.manifest.chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self.manifest.chunks

    def store_bytes(self) -> int:
        total = 0
        for entry in self.manifest.chunks.values():
            p = self.root / entry.path
            if p.exists():
                total += p.stat().st_size
        return total

    # -- precompute ---------------------------------------------------------

    def precompute(self, weights: ModelWeights, token_ids,
                   anchor_ratio: float = DEFAULT_ANCHOR_RATIO,
                   source_name: str = "",
                   anchor_norm_mode: str = "critical") -> ChunkRecord:
        """Compute, persist, and index a chunk's KV; idempotent by content hash.

        Key norms are L2 over d_head, averaged over heads, taken at the
        critical layer (or averaged over all layers with
        ``anchor_norm_mode="mean_all"``).
        """
        if weights.config != self.config:
            raise FingerprintMismatch("weights were built for a different config")
        token_ids = np.asarray(token_ids, dtype=np.int64)
        if token_ids.size == 0:
            raise ValueError("token_ids must be non-empty")
        cid = chunk_hash(token_ids)
        with self._lock:
            if cid in self.manifest.chunks:
                self.manifest.cache_hits += 1
                self.flush()
                return self.get_record(cid)
            self.manifest.cache_misses += 1

            trace = forward_full(weights, token_ids, start_position=0)
            per_layer_norms = np.stack(
                [np.linalg.norm(kv.keys, axis=2).mean(axis=1) for kv in trace.layer_kv])
            if anchor_norm_mode == "critical":
                key_norms = per_layer_norms[self.config.critical_layer - 1]
            elif anchor_norm_mode == "mean_all":
                key_norms = per_layer_norms.mean(axis=0)
            else:
                raise ValueError(f"unknown anchor_norm_mode: {anchor_norm_mode}")
            key_norms = key_norms.astype(np.float32)

            record = ChunkRecord(
                chunk_id=cid,
                token_ids=token_ids,
                layer_kv=trace.layer_kv,
                key_norms=key_norms,
                anchor_indices=extract_anchors(key_norms, anchor_ratio),
                source_name=source_name,
            )
            path = persist_chunk(record, self.root, self.fingerprint)
            self.manifest.chunks[cid] = ManifestEntry(
                str(path.relative_to(self.root)), record.n_tokens,
                len(record.anchor_indices), source_name)
            self._cache[cid] = record
            self.flush()
            return record

    # -- reads --------------------------------------------------------------

    def get_record(self, chunk_id: str, with_tensors: bool = True) -> ChunkRecord:
        if chunk_id not in self.manifest.chunks:
            raise KeyError(f"unknown chunk: {chunk_id}")
        if chunk_id in self._cache:
            return self._cache[chunk_id]
        rec = load_chunk(self.root / self.manifest.chunks[chunk_id].path,
                         expect_fingerprint=self.fingerprint,
                         with_tensors=with_tensors)
        if with_tensors:
            self._cache[chunk_id] = rec
        return rec

    def load_meta(self, chunk_id: str) -> ChunkRecord:
        """Record without KV tensors (manifest-backed browsing)."""
        if chunk_id in self._cache:
            rec = self._cache[chunk_id]
            return ChunkRecord(rec.chunk_id, rec.token_ids, [], rec.key_norms,
                               rec.anchor_indices, rec.source_name)
        if chunk_id not in self.manifest.chunks:
            raise KeyError(f"unknown chunk: {chunk_id}")
        return load_chunk(self.root / self.manifest.chunks[chunk_id].path,
                          expect_fingerprint=self.fingerprint, with_tensors=False)

    def fetch_layer(self, chunk_id: str, layer: int) -> tuple[LayerKV, float]:
        """One layer's KV plus its simulated SSD fetch duration.

        ``layer`` is 1-based. Counts toward layers_fetched / bytes_fetched
        and advances the store clock when one is attached.
        """
        rec = self.get_record(chunk_id)
        if not (1 <= layer <= len(rec.layer_kv)):
            raise KeyError(f"layer {layer} out of range 1..{len(rec.layer_kv)}")
        n_heads, d_head = rec.layer_kv[0].keys.shape[1:]
        n_bytes = layer_kv_bytes(rec.n_tokens, n_heads, d_head)
        duration = self.tier.fetch_seconds(n_bytes)
        self.manifest.layers_fetched += 1
        self.manifest.bytes_fetched += n_bytes
        if self.clock is not None:
            self.clock.advance(duration)
        return rec.layer_kv[layer - 1], duration

    def fetch_anchor_rows(self, chunk_id: str, layer: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """Anchor-row K/V of one layer: (keys, values, row_indices, duration).

        Zero-cost when the anchor tier is memory-resident; otherwise charged
        like an SSD fetch of just those rows.
        """
        rec = self.get_record(chunk_id)
        if not (1 <= layer <= len(rec.layer_kv)):
            raise KeyError(f"layer {layer} out of range 1..{len(rec.layer_kv)}")
        idx = rec.anchor_indices
        kv = rec.layer_kv[layer - 1]
        if self.tier.anchors_resident:
            duration = 0.0
        else:
            n_heads, d_head = kv.keys.shape[1:]
            duration = self.tier.fetch_seconds(layer_kv_bytes(len(idx), n_heads, d_head))
            if self.clock is not None:
                self.clock.advance(duration)
        return kv.keys[idx], kv.values[idx], idx, duration
