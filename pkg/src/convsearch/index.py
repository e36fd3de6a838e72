"""Inverted index over a passage collection with BM25 and sparse-vector retrieval.

The index serves two scoring modes over the same posting-list substrate:

* ``bm25`` mode stores raw term frequencies per document and scores text
  queries with BM25 (default k1=0.9, b=0.4, the common TREC-toolkit
  defaults).  The IDF is the non-negative variant
  ``ln(1 + (N - df + 0.5) / (df + 0.5))`` and the per-term contribution is
  ``idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))``.  Every
  query token occurrence contributes one term clause, so repeated query
  terms boost the score.
* ``sparse`` mode stores externally computed term weights (e.g. the output
  of a learned sparse encoder) and scores sparse query vectors by dot
  product.

Indexes are immutable after construction and safe for concurrent readers.
All retrieval is deterministic: ties are broken by ascending doc_id, and
score accumulation follows a fixed iteration order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

__all__ = [
    "AnalyzerConfig",
    "Passage",
    "SparseVector",
    "RankedList",
    "InvertedIndex",
    "read_corpus",
    "build_index",
    "build_sparse_index",
    "load_sparse_vectors",
    "bm25_retrieve",
    "sparse_retrieve",
    "text_to_query_vector",
    "save_index",
    "load_index",
]

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class AnalyzerConfig:
    """Text analysis settings shared by indexing and query parsing.

    Defaults: lowercase, split on non-alphanumeric runs, no stemming,
    no stopwords.
    """

    lowercase: bool = True
    stopwords: frozenset[str] = frozenset()

    def tokenize(self, text: str) -> list[str]:
        tokens = _TOKEN_RE.findall(text)
        if self.lowercase:
            tokens = [t.lower() for t in tokens]
        if self.stopwords:
            tokens = [t for t in tokens if t not in self.stopwords]
        return tokens

    def to_dict(self) -> dict:
        return {"lowercase": self.lowercase, "stopwords": sorted(self.stopwords)}

    @classmethod
    def from_dict(cls, data: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=bool(data.get("lowercase", True)),
            stopwords=frozenset(data.get("stopwords", ())),
        )


@dataclass(frozen=True)
class Passage:
    """One retrievable unit of the collection."""

    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("passage doc_id must be non-empty")


@dataclass(frozen=True)
class SparseVector:
    """Term-to-weight mapping with strictly positive weights.

    Zero-weight entries are dropped on construction; negative weights are
    rejected.  Represents learned-sparse document/query expansions as well
    as plain term-count query vectors.
    """

    entries: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned = {}
        for term, weight in self.entries.items():
            w = float(weight)
            if w < 0:
                raise ValueError(f"negative weight {w} for term '{term}'")
            if w > 0:
                cleaned[term] = w
        object.__setattr__(self, "entries", cleaned)

    def __len__(self) -> int:
        return len(self.entries)

    def dot(self, other: "SparseVector") -> float:
        small, big = self.entries, other.entries
        if len(big) < len(small):
            small, big = big, small
        return sum(w * big[t] for t, w in small.items() if t in big)


@dataclass(frozen=True)
class RankedList:
    """Scored documents for one query, best first.

    Invariants enforced on construction: scores non-increasing, doc_ids
    distinct, and equal scores ordered by ascending doc_id.
    """

    query_id: str
    items: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple((d, float(s)) for d, s in self.items))
        seen: set[str] = set()
        prev: tuple[str, float] | None = None
        for doc_id, score in self.items:
            if doc_id in seen:
                raise ValueError(f"duplicate doc_id '{doc_id}' in ranked list")
            seen.add(doc_id)
            if prev is not None:
                if score > prev[1]:
                    raise ValueError("ranked list scores must be non-increasing")
                if score == prev[1] and doc_id < prev[0]:
                    raise ValueError("tied scores must be ordered by ascending doc_id")
            prev = (doc_id, score)

    @classmethod
    def from_scores(cls, query_id: str, scores: dict[str, float]) -> "RankedList":
        """Build a ranked list from a doc_id -> score mapping."""
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(query_id, tuple(ordered))

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class InvertedIndex:
    """Immutable term -> postings map plus corpus statistics.

    ``mode`` selects the payload meaning: raw term frequency (``bm25``) or
    stored term weight (``sparse``).  Every doc_id that occurs in a posting
    also appears in ``doc_lengths``; ``doc_count`` equals
    ``len(doc_lengths)`` and ``avg_doc_length`` is the mean length
    (0.0 for an empty index).
    """

    mode: str
    postings: dict[str, tuple[tuple[str, float], ...]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float
    analyzer: AnalyzerConfig = AnalyzerConfig()

    def __post_init__(self) -> None:
        if self.mode not in ("bm25", "sparse"):
            raise ValueError(f"unknown index mode '{self.mode}'")

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))


def read_corpus(source: str | Path | IO[str]) -> Iterator[Passage]:
    """Yield passages from a ``<doc_id><TAB><text>`` file (UTF-8, one per line).

    Raises ValueError with the line number for lines without a tab.
    Blank lines are skipped.
    """
    close = False
    if isinstance(source, (str, Path)):
        handle: IO[str] = open(source, "r", encoding="utf-8")
        close = True
    else:
        handle = source
    try:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"corpus line {lineno}: expected '<doc_id>\\t<text>'")
            doc_id, text = line.split("\t", 1)
            if not doc_id:
                raise ValueError(f"corpus line {lineno}: empty doc_id")
            yield Passage(doc_id=doc_id, text=text)
    finally:
        if close:
            handle.close()


def build_index(
    corpus: Iterable[Passage],
    analyzer: AnalyzerConfig | None = None,
    allow_empty_text: bool = False,
) -> InvertedIndex:
    """Build a BM25-mode index from a passage stream.

    Deterministic given identical corpus order and analyzer config.

    Raises:
        ValueError: on a duplicate doc_id (naming it), or on an empty
            passage text unless ``allow_empty_text`` is set.
    """
    analyzer = analyzer or AnalyzerConfig()
    postings: dict[str, list[tuple[str, float]]] = {}
    doc_lengths: dict[str, int] = {}
    for passage in corpus:
        if passage.doc_id in doc_lengths:
            raise ValueError(f"duplicate doc_id '{passage.doc_id}'")
        if not passage.text and not allow_empty_text:
            raise ValueError(f"empty text for doc_id '{passage.doc_id}' (allow_empty_text=False)")
        tokens = analyzer.tokenize(passage.text)
        doc_lengths[passage.doc_id] = len(tokens)
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for term, count in counts.items():
            postings.setdefault(term, []).append((passage.doc_id, float(count)))
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count if doc_count else 0.0
    return InvertedIndex(
        mode="bm25",
        postings={t: tuple(p) for t, p in postings.items()},
        doc_lengths=doc_lengths,
        doc_count=doc_count,
        avg_doc_length=avg,
        analyzer=analyzer,
    )


def build_sparse_index(
    vectors: dict[str, SparseVector],
    analyzer: AnalyzerConfig | None = None,
) -> InvertedIndex:
    """Build a sparse-mode index from precomputed document vectors.

    Document length is the number of stored (non-zero) terms; it is kept
    for corpus statistics only and plays no role in dot-product scoring.
    """
    analyzer = analyzer or AnalyzerConfig()
    postings: dict[str, list[tuple[str, float]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc_id, vector in vectors.items():
        if doc_id in doc_lengths:
            raise ValueError(f"duplicate doc_id '{doc_id}'")
        doc_lengths[doc_id] = len(vector)
        for term, weight in vector.entries.items():
            postings.setdefault(term, []).append((doc_id, weight))
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count if doc_count else 0.0
    return InvertedIndex(
        mode="sparse",
        postings={t: tuple(p) for t, p in postings.items()},
        doc_lengths=doc_lengths,
        doc_count=doc_count,
        avg_doc_length=avg,
        analyzer=analyzer,
    )


_VECTOR_ENTRY_RE = re.compile(r"^(?P<term>.+):(?P<weight>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)$")


def load_sparse_vectors(source: str | Path | IO[str]) -> dict[str, SparseVector]:
    """Parse a ``<doc_id><TAB><term>:<weight>( <term>:<weight>)*`` file.

    Weights must be non-negative decimals; zero weights are dropped per the
    sparse-vector invariant.  A doc_id may appear on one line only.

    Raises:
        ValueError: naming the line number, for malformed lines, negative
            weights, or duplicate doc_ids.
    """
    close = False
    if isinstance(source, (str, Path)):
        handle: IO[str] = open(source, "r", encoding="utf-8")
        close = True
    else:
        handle = source
    vectors: dict[str, SparseVector] = {}
    try:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"sparse-vector line {lineno}: expected '<doc_id>\\t<entries>'")
            doc_id, payload = line.split("\t", 1)
            if not doc_id:
                raise ValueError(f"sparse-vector line {lineno}: empty doc_id")
            if doc_id in vectors:
                raise ValueError(f"sparse-vector line {lineno}: duplicate doc_id '{doc_id}'")
            entries: dict[str, float] = {}
            for part in payload.split(" "):
                if not part:
                    continue
                match = _VECTOR_ENTRY_RE.match(part)
                if match is None:
                    raise ValueError(
                        f"sparse-vector line {lineno}: malformed entry '{part}'"
                    )
                weight = float(match.group("weight"))
                if weight < 0:
                    raise ValueError(
                        f"sparse-vector line {lineno}: negative weight in '{part}'"
                    )
                entries[match.group("term")] = weight
            vectors[doc_id] = SparseVector(entries)
    finally:
        if close:
            handle.close()
    return vectors


def _idf(doc_count: int, doc_freq: int) -> float:
    return math.log(1.0 + (doc_count - doc_freq + 0.5) / (doc_freq + 0.5))


def bm25_retrieve(
    index: InvertedIndex,
    query_text: str,
    k: int,
    k1: float = 0.9,
    b: float = 0.4,
    query_id: str = "",
) -> RankedList:
    """Top-k documents for a text query under BM25.

    Only documents with a positive score are returned, ordered by
    descending score then ascending doc_id.  A query that tokenizes to
    nothing yields an empty list.

    Raises:
        ValueError: if ``k`` < 1 or the index is not in bm25 mode.
    """
    if index.mode != "bm25":
        raise ValueError(f"bm25_retrieve requires a bm25-mode index, got '{index.mode}'")
    if k < 1:
        raise ValueError("k must be >= 1")
    tokens = index.analyzer.tokenize(query_text)
    scores: dict[str, float] = {}
    avgdl = index.avg_doc_length or 1.0
    for token in tokens:
        posting = index.postings.get(token)
        if not posting:
            continue
        idf = _idf(index.doc_count, len(posting))
        for doc_id, tf in posting:
            norm = 1.0 - b + b * (index.doc_lengths[doc_id] / avgdl)
            contribution = idf * (tf * (k1 + 1.0)) / (tf + k1 * norm)
            scores[doc_id] = scores.get(doc_id, 0.0) + contribution
    positive = {d: s for d, s in scores.items() if s > 0.0}
    ordered = sorted(positive.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return RankedList(query_id, tuple(ordered))


def sparse_retrieve(
    index: InvertedIndex, query: SparseVector, k: int, query_id: str = ""
) -> RankedList:
    """Top-k documents by dot product between query and stored weights.

    Zero-score documents are excluded; an empty query vector yields an
    empty list.

    Raises:
        ValueError: if ``k`` < 1 or the index is not in sparse mode.
    """
    if index.mode != "sparse":
        raise ValueError(f"sparse_retrieve requires a sparse-mode index, got '{index.mode}'")
    if k < 1:
        raise ValueError("k must be >= 1")
    scores: dict[str, float] = {}
    for term, query_weight in query.entries.items():
        posting = index.postings.get(term)
        if not posting:
            continue
        for doc_id, doc_weight in posting:
            scores[doc_id] = scores.get(doc_id, 0.0) + query_weight * doc_weight
    positive = {d: s for d, s in scores.items() if s > 0.0}
    ordered = sorted(positive.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return RankedList(query_id, tuple(ordered))


def text_to_query_vector(text: str, analyzer: AnalyzerConfig | None = None) -> SparseVector:
    """Encode query text as a term-count sparse vector.

    This is the default query-side encoder for sparse retrieval when no
    learned encoder output is available: each analyzed token contributes
    weight 1 per occurrence.
    """
    analyzer = analyzer or AnalyzerConfig()
    counts: dict[str, float] = {}
    for token in analyzer.tokenize(text):
        counts[token] = counts.get(token, 0.0) + 1.0
    return SparseVector(counts)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize an index to a JSON file."""
    payload = {
        "mode": index.mode,
        "analyzer": index.analyzer.to_dict(),
        "doc_lengths": index.doc_lengths,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "postings": {term: [[d, w] for d, w in posting] for term, posting in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    """Load an index saved by :func:`save_index`."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return InvertedIndex(
        mode=payload["mode"],
        postings={
            term: tuple((d, float(w)) for d, w in posting)
            for term, posting in payload["postings"].items()
        },
        doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
        doc_count=int(payload["doc_count"]),
        avg_doc_length=float(payload["avg_doc_length"]),
        analyzer=AnalyzerConfig.from_dict(payload.get("analyzer", {})),
    )
