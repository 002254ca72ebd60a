"""Deterministic benchmark cases: synthetic documents with planted spans,
queries that quote those spans, and the lexical retriever that connects them.

Retrieval is a stand-in for an embedding pipeline: cosine similarity over
byte-4-gram term-frequency vectors, ties broken toward the lower chunk id.
"""

from __future__ import annotations

import math
from collections import Counter
from pathlib import Path

from qcfuse.model import SplitMix64
from qcfuse.store import ChunkStore

_CONSONANTS = "bcdfghjklmnpqrstvwz"
_VOWELS = "aeiou"


def _word(stream: SplitMix64, syllables: int) -> str:
    return "".join(_CONSONANTS[stream.next_below(len(_CONSONANTS))] +
                   _VOWELS[stream.next_below(len(_VOWELS))]
                   for _ in range(syllables))


def synth_document(seed: int, n_bytes: int) -> str:
    """Pseudo-prose of pronounceable words, exactly ``n_bytes`` bytes."""
    stream = SplitMix64(seed)
    parts: list[str] = []
    size = 0
    while size < n_bytes:
        w = _word(stream, 1 + stream.next_below(3))
        parts.append(w)
        size += len(w) + 1
    text = " ".join(parts)
    return text[:n_bytes]


def make_cases(out_dir: Path | str, n_docs: int = 6, doc_bytes: int = 256,
               n_queries: int = 50, query_bytes: tuple[int, int] = (4, 16),
               seed: int = 0) -> tuple[Path, Path]:
    """Write a docs directory and a one-query-per-line cases file.

    Each query is a contiguous span lifted verbatim from one document, so
    the lexical retriever has a planted relevant target.
    """
    out = Path(out_dir)
    docs_dir = out / "docs"
    docs_dir.mkdir(parents=True, exist_ok=True)
    stream = SplitMix64(seed)

    docs = []
    for i in range(n_docs):
        text = synth_document(seed * 1_000_003 + i, doc_bytes)
        (docs_dir / f"doc_{i:02d}.txt").write_text(text)
        docs.append(text)

    lo, hi = query_bytes
    lines = []
    for _ in range(n_queries):
        doc = docs[stream.next_below(n_docs)]
        qlen = lo + stream.next_below(hi - lo + 1)
        start = stream.next_below(max(1, len(doc) - qlen))
        span = doc[start:start + qlen].replace("\n", " ")
        lines.append(span)
    cases_path = out / "cases.txt"
    cases_path.write_text("\n".join(lines) + "\n")
    return docs_dir, cases_path


def load_cases(path: Path | str) -> list[str]:
    return [line for line in Path(path).read_text().splitlines() if line.strip()]


def byte_4grams(data: bytes) -> Counter:
    """Term frequencies of contiguous 4-byte grams; short inputs count as one gram."""
    if len(data) < 4:
        return Counter({data: 1}) if data else Counter()
    return Counter(data[i:i + 4] for i in range(len(data) - 3))


def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(v * b[k] for k, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


def retrieve_scored(store: ChunkStore, query_text: str, top_k: int = 4) -> list[tuple[str, float]]:
    """(chunk_id, cosine) ranked by 4-gram cosine, ties toward lower id."""
    grams = byte_4grams(query_text.encode("utf-8"))
    scored = []
    for cid in store.chunk_ids():
        meta = store.load_meta(cid)
        text = bytes(int(t) & 0xFF for t in meta.token_ids)
        scored.append((-cosine(grams, byte_4grams(text)), cid))
    scored.sort()
    return [(cid, -neg) for neg, cid in scored[:top_k]]


def retrieve(store: ChunkStore, query_text: str, top_k: int = 4) -> list[str]:
    """Chunk ids ranked by 4-gram cosine to the query, ties toward lower id."""
    return [cid for cid, _ in retrieve_scored(store, query_text, top_k)]
