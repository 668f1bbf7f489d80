"""Textual and visual candidate retrieval.

Text retrieval cascades through three priorities: exact object-name matches
ranked by BM25 over the simulation records, then dense cosine ranking of the
simulation records when the best score clears a threshold, then dense
ranking over an expanded source set. Exactly one priority fires per query
and the returned trace proves which one. The visual layer then keeps the
top-n candidates by embedding cosine against the observation.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .tensor_store import SOURCES

if TYPE_CHECKING:  # pragma: no cover
    from .knowledge_base import KnowledgeBase

P1_SPARSE = "P1_sparse"
P2_DENSE = "P2_dense"
P3_EXPANDED = "P3_expanded"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_UNIT_TOL = 1e-6


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character; drop empties."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Instruction:
    """A task instruction: raw text, derived tokens, optional unit embedding."""

    text: str
    embedding: np.ndarray | None = None
    tokens: tuple[str, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(tokenize(self.text)))
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=np.float64)
            if emb.ndim != 1:
                raise ValueError("instruction embedding must be 1-D")
            norm = float(np.linalg.norm(emb))
            if abs(norm - 1.0) > _UNIT_TOL:
                raise ValueError(f"instruction embedding norm {norm:.6f}, expected 1")
            object.__setattr__(self, "embedding", emb)


@dataclass(frozen=True)
class RetrievalConfig:
    tau_den: float = 0.75
    top_n: int = 5
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    sources_priority3: tuple[str, ...] = ("internet", "robotic", "simulation")

    def __post_init__(self) -> None:
        if not -1.0 <= self.tau_den <= 1.0:
            raise ValueError("tau_den must lie in [-1, 1]")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")
        if self.bm25_k1 <= 0:
            raise ValueError("bm25_k1 must be positive")
        if not 0.0 <= self.bm25_b <= 1.0:
            raise ValueError("bm25_b must lie in [0, 1]")
        unknown = set(self.sources_priority3) - SOURCES
        if unknown:
            raise ValueError(f"unknown sources in priority-3 set: {sorted(unknown)}")
        object.__setattr__(self, "sources_priority3", tuple(sorted(set(self.sources_priority3))))


@dataclass(frozen=True)
class RetrievalTrace:
    """Which priority fired, every score it computed, and the handed-off ids."""

    priority_used: str
    scored: tuple[tuple[str, float, str], ...]
    candidates: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "priority_used": self.priority_used,
            "scored": [[i, s, kind] for i, s, kind in self.scored],
            "candidates": list(self.candidates),
        }


# ---------------------------------------------------------------------------
# BM25 over the simulation documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BM25Index:
    term_freqs: Mapping[str, Mapping[str, int]]
    doc_len: Mapping[str, int]
    df: Mapping[str, int]
    n_docs: int
    avgdl: float
    k1: float = 1.2
    b: float = 0.75


def build_bm25_index(
    docs: Mapping[str, Sequence[str]], k1: float = 1.2, b: float = 0.75
) -> BM25Index:
    """Index token lists by document id."""
    term_freqs = {doc_id: dict(Counter(tokens)) for doc_id, tokens in docs.items()}
    doc_len = {doc_id: len(docs[doc_id]) for doc_id in docs}
    df: Counter[str] = Counter()
    for freqs in term_freqs.values():
        df.update(freqs.keys())
    n_docs = len(docs)
    avgdl = sum(doc_len.values()) / n_docs if n_docs else 0.0
    return BM25Index(
        term_freqs=term_freqs, doc_len=doc_len, df=dict(df),
        n_docs=n_docs, avgdl=avgdl, k1=k1, b=b,
    )


def bm25_score(query_tokens: Sequence[str], doc_id: str, index: BM25Index) -> float:
    """Sum of per-query-token BM25 contributions (repeated tokens count again)."""
    if doc_id not in index.term_freqs:
        raise ValueError(f"unknown document id '{doc_id}'")
    freqs = index.term_freqs[doc_id]
    dl = index.doc_len[doc_id]
    score = 0.0
    for token in query_tokens:
        tf = freqs.get(token, 0)
        if tf == 0:
            continue
        n_t = index.df[token]
        idf = math.log(1.0 + (index.n_docs - n_t + 0.5) / (n_t + 0.5))
        denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
        score += idf * tf * (index.k1 + 1.0) / denom
    return score


def bm25_docs_from_kb(kb: "KnowledgeBase") -> dict[str, list[str]]:
    """Simulation-source documents: instruction tokens + object-name tokens."""
    docs: dict[str, list[str]] = {}
    for example_id in kb.by_source.get("simulation", []):
        example = kb.records[example_id]
        docs[example_id] = tokenize(example.instruction) + tokenize(example.object_name)
    return docs


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"cosine needs equal-length vectors, got {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine of zero-norm vector")
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def _ranked(scored: list[tuple[str, float]]) -> list[tuple[str, float]]:
    # score descending, ties by ascending id
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


def _dense_scores(kb: "KnowledgeBase", instr: Instruction, ids: Sequence[str]) -> list[tuple[str, float]]:
    if instr.embedding is None:
        raise ValueError("dense retrieval requires an instruction embedding")
    scored = []
    for example_id in ids:
        example = kb.records[example_id]
        emb = example.instruction_embedding()
        if emb is None:
            raise ValueError(
                f"example '{example_id}' has no instruction embedding (required for dense retrieval)"
            )
        scored.append((example_id, cosine(instr.embedding, emb)))
    return _ranked(scored)


def hybrid_retrieve(
    kb: "KnowledgeBase",
    instr: Instruction,
    cfg: RetrievalConfig | None = None,
    *,
    index: BM25Index | None = None,
) -> tuple[list[str], RetrievalTrace]:
    """Three-priority candidate retrieval; returns the winner's full ranking.

    Truncation to top-n happens in the visual layer, not here.
    """
    if cfg is None:
        cfg = RetrievalConfig()
    if len(kb.records) == 0:
        raise ValueError("empty knowledge base")

    sim_ids = kb.by_source.get("simulation", [])
    instr_tokens = set(instr.tokens)

    # Priority 1: every object-name token appears in the instruction
    matched = []
    for example_id in sim_ids:
        name_tokens = tokenize(kb.records[example_id].object_name)
        if name_tokens and set(name_tokens) <= instr_tokens:
            matched.append(example_id)
    if matched:
        if index is None:
            index = build_bm25_index(bm25_docs_from_kb(kb), cfg.bm25_k1, cfg.bm25_b)
        scored = _ranked([(i, bm25_score(instr.tokens, i, index)) for i in matched])
        candidates = [i for i, _ in scored]
        trace = RetrievalTrace(
            priority_used=P1_SPARSE,
            scored=tuple((i, s, "bm25") for i, s in scored),
            candidates=tuple(candidates),
        )
        return candidates, trace

    # Priority 2: dense ranking restricted to simulation records
    if sim_ids:
        scored = _dense_scores(kb, instr, sim_ids)
        if scored[0][1] >= cfg.tau_den:
            candidates = [i for i, _ in scored]
            trace = RetrievalTrace(
                priority_used=P2_DENSE,
                scored=tuple((i, s, "cosine") for i, s in scored),
                candidates=tuple(candidates),
            )
            return candidates, trace

    # Priority 3: dense ranking over the expanded source set
    expanded: list[str] = []
    for source in cfg.sources_priority3:
        expanded.extend(kb.by_source.get(source, []))
    if not expanded:
        raise ValueError(f"no records in priority-3 sources {list(cfg.sources_priority3)}")
    scored = _dense_scores(kb, instr, sorted(expanded))
    candidates = [i for i, _ in scored]
    trace = RetrievalTrace(
        priority_used=P3_EXPANDED,
        scored=tuple((i, s, "cosine") for i, s in scored),
        candidates=tuple(candidates),
    )
    return candidates, trace


def rank_visual(
    obs_embedding, candidates: Sequence[str], kb: "KnowledgeBase"
) -> list[tuple[str, float]]:
    """All candidates scored by cosine against the observation embedding, ranked."""
    obs = np.asarray(obs_embedding, dtype=np.float64)
    scored = []
    for example_id in candidates:
        example = kb.get_example(example_id)
        scored.append((example_id, cosine(obs, example.contact_embedding())))
    return _ranked(scored)


def visual_top_n(
    obs_embedding,
    candidates: Sequence[str],
    kb: "KnowledgeBase",
    cfg: RetrievalConfig | None = None,
) -> list[str]:
    """Top-n candidate ids by contact-frame embedding similarity."""
    if cfg is None:
        cfg = RetrievalConfig()
    ranked = rank_visual(obs_embedding, candidates, kb)
    return [example_id for example_id, _ in ranked[: cfg.top_n]]
