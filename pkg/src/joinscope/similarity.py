"""The five pairwise column-similarity signals.

All signals are symmetric and live in [0, 1]:
  - Jaccard on full (distinct, lowercased) values: strong equi-join indicator.
  - Jaccard on infrequent-token representatives: robust to per-value formatting noise.
  - Max set containment: catches small columns fully covered by large ones.
  - Embedding cosine on frequent tokens, mapped to [0, 1].
  - Jensen-Shannon similarity of token-frequency distributions.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from joinscope.repo import Column, Repository, tokenize


class SignalType(str, Enum):
    JACCARD_FULL = "jaccard_full"
    JACCARD_INFREQUENT = "jaccard_infrequent"
    MAX_CONTAINMENT = "max_containment"
    EMBEDDING_COSINE = "embedding_cosine"
    DISTRIBUTION_JS = "distribution_js"


ALL_SIGNALS = list(SignalType)


@dataclass
class SimilarityRecord:
    node_a: int
    node_b: int
    scores: dict[SignalType, float]


TokenHistogram = Counter


def token_histogram(col: Column) -> TokenHistogram:
    """Occurrence counts of every token across all cell values of the column."""
    hist: Counter[str] = Counter()
    for v in col.values:
        hist.update(tokenize(v))
    return hist


def _lower_distinct(col: Column) -> set[str]:
    return {v.lower() for v in col.distinct_values}


def jaccard_full(a: Column, b: Column) -> float:
    sa, sb = _lower_distinct(a), _lower_distinct(b)
    if not sa and not sb:
        return 0.0
    union = len(sa | sb)
    return len(sa & sb) / union if union else 0.0


def infrequent_representatives(col: Column, hist: TokenHistogram) -> set[str]:
    """Per distinct value, the token with the lowest column-wide frequency (tie: smallest)."""
    reps = set()
    for v in col.distinct_values:
        tokens = tokenize(v)
        if tokens:
            reps.add(min(tokens, key=lambda t: (hist[t], t)))
    return reps


def jaccard_infrequent(a: Column, b: Column,
                       hist_a: TokenHistogram, hist_b: TokenHistogram) -> float:
    ra = infrequent_representatives(a, hist_a)
    rb = infrequent_representatives(b, hist_b)
    if not ra and not rb:
        return 0.0
    union = len(ra | rb)
    return len(ra & rb) / union if union else 0.0


def max_containment(a: Column, b: Column) -> float:
    sa, sb = _lower_distinct(a), _lower_distinct(b)
    if not sa or not sb:
        return 0.0
    inter = len(sa & sb)
    return max(inter / len(sa), inter / len(sb))


def embed_column(col: Column, hist: TokenHistogram, embedder) -> np.ndarray | None:
    """Mean embedding of each distinct value's most frequent token, L2-normalized."""
    selected = []
    for v in col.distinct_values:
        tokens = tokenize(v)
        if tokens:
            selected.append(min(tokens, key=lambda t: (-hist[t], t)))
    if not selected:
        return None
    mean = np.mean([embedder.embed(t) for t in selected], axis=0)
    norm = np.linalg.norm(mean)
    if norm > 0:
        mean = mean / norm
    return mean


def embedding_similarity_from_vectors(ua: np.ndarray | None, ub: np.ndarray | None) -> float:
    if ua is None or ub is None:
        return 0.0
    cos = float(np.dot(ua, ub))
    return min(1.0, max(0.0, (cos + 1.0) / 2.0))


def embedding_similarity(a: Column, b: Column, embedder) -> float:
    return embedding_similarity_from_vectors(
        embed_column(a, token_histogram(a), embedder),
        embed_column(b, token_histogram(b), embedder),
    )


def _js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence with log base 2 (ranges over [0, 1])."""
    m = 0.5 * (p + q)
    div = 0.0
    for dist in (p, q):
        mask = dist > 0
        div += 0.5 * float(np.sum(dist[mask] * np.log2(dist[mask] / m[mask])))
    return div


def js_similarity(a: Column, b: Column,
                  hist_a: TokenHistogram | None = None,
                  hist_b: TokenHistogram | None = None) -> float:
    """1 - JSD between the two columns' token-frequency distributions."""
    ha = token_histogram(a) if hist_a is None else hist_a
    hb = token_histogram(b) if hist_b is None else hist_b
    if not ha or not hb:
        return 0.0
    vocab = sorted(set(ha) | set(hb))
    p = np.array([ha[t] for t in vocab], dtype=float)
    q = np.array([hb[t] for t in vocab], dtype=float)
    p /= p.sum()
    q /= q.sum()
    return min(1.0, max(0.0, 1.0 - _js_divergence(p, q)))


def compute_all_pairs(repo: Repository, embedder) -> list[SimilarityRecord]:
    """One record per unordered cross-table column pair, ordered by (node_a, node_b)."""
    hists = [token_histogram(c) for c in repo.columns]
    embeds = [embed_column(c, hists[c.node_id], embedder) for c in repo.columns]
    records = []
    n = repo.n_nodes
    for i in range(n):
        ci = repo.columns[i]
        for j in range(i + 1, n):
            cj = repo.columns[j]
            if ci.table_id == cj.table_id:
                continue
            scores = {
                SignalType.JACCARD_FULL: jaccard_full(ci, cj),
                SignalType.JACCARD_INFREQUENT: jaccard_infrequent(ci, cj, hists[i], hists[j]),
                SignalType.MAX_CONTAINMENT: max_containment(ci, cj),
                SignalType.EMBEDDING_COSINE: embedding_similarity_from_vectors(embeds[i], embeds[j]),
                SignalType.DISTRIBUTION_JS: js_similarity(ci, cj, hists[i], hists[j]),
            }
            records.append(SimilarityRecord(i, j, scores))
    return records


_CACHE_HEADER = ["node_a", "node_b"] + [s.value for s in ALL_SIGNALS]


def save_similarity_cache(records: list[SimilarityRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(_CACHE_HEADER)
        for r in records:
            w.writerow([r.node_a, r.node_b] + [f"{r.scores[s]:.9f}" for s in ALL_SIGNALS])


def load_similarity_cache(path: str | Path) -> list[SimilarityRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != _CACHE_HEADER:
            raise ValueError(f"unexpected similarity cache header in {path}")
        for row in reader:
            scores = {s: float(v) for s, v in zip(ALL_SIGNALS, row[2:])}
            records.append(SimilarityRecord(int(row[0]), int(row[1]), scores))
    return records
