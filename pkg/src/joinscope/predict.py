"""Inference on original repositories and evaluation: PR curves, best F1, PR-AUC, baselines."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from joinscope.fabricate import JoinExample
from joinscope.graph import build_graph
from joinscope.model import RgcnModel, forward, score_pairs
from joinscope.profile import profile_repository
from joinscope.repo import Repository
from joinscope.similarity import ALL_SIGNALS, SignalType, SimilarityRecord, compute_all_pairs
from joinscope.tensor import AdamState, adam_step, sigmoid, xavier_uniform


@dataclass
class JoinPrediction:
    node_a: int
    node_b: int
    score: float


@dataclass
class PRPoint:
    precision: float
    recall: float
    threshold: float


def infer(model: RgcnModel, repo: Repository, embedder,
          records: list[SimilarityRecord] | None = None) -> list[JoinPrediction]:
    """Score every cross-table pair of the repository with the trained model."""
    if model.k is None or model.normalizer is None:
        raise ValueError("model has no stored k / feature normalizer; train it first")
    if records is None:
        records = compute_all_pairs(repo, embedder)
    if not records:
        return []
    profiles = profile_repository(repo.columns)
    X = np.stack([model.normalizer.apply(p.features) for p in profiles])
    if X.shape[1] != model.d_f:
        raise ValueError(f"feature dimension {X.shape[1]} != model's {model.d_f}")
    g = build_graph(records, model.k, n_nodes=repo.n_nodes)
    H = forward(model, g, X)
    pairs = np.array([(r.node_a, r.node_b) for r in records])
    scores = score_pairs(model, H[pairs[:, 0]], H[pairs[:, 1]])
    preds = [JoinPrediction(int(a), int(b), float(s)) for (a, b), s in zip(pairs, scores)]
    preds.sort(key=lambda p: (-p.score, p.node_a, p.node_b))
    return preds


# ---------------------------------------------------------------------------
# Ground truth

@dataclass
class GroundTruth:
    positives: set[frozenset]  # frozenset of (table, column-name) endpoints
    kinds: dict[frozenset, str]

    def __len__(self) -> int:
        return len(self.positives)


def load_ground_truth(path: str | Path) -> GroundTruth:
    positives = set()
    kinds = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            key = frozenset([(row["table_a"], row["column_a"]), (row["table_b"], row["column_b"])])
            positives.add(key)
            if row.get("kind"):
                kinds[key] = row["kind"]
    return GroundTruth(positives=positives, kinds=kinds)


def truth_node_pairs(truth: GroundTruth, repo: Repository) -> set[tuple[int, int]]:
    """Resolve (table, column-name) pairs to node id pairs; unmatched rows are an error."""
    by_name: dict[tuple[str, str], int] = {}
    for col in repo.columns:
        by_name[(col.table_id, col.name)] = col.node_id
    pairs = set()
    for key in truth.positives:
        endpoints = sorted(key)
        resolved = []
        for table, column in endpoints:
            node = by_name.get((table, column))
            if node is None:
                raise ValueError(f"ground truth references unknown column {column!r} of table {table!r}")
            resolved.append(node)
        a, b = sorted(resolved)
        pairs.add((a, b))
    return pairs


# ---------------------------------------------------------------------------
# PR metrics

def pr_curve_from_scores(scores: np.ndarray, labels: np.ndarray) -> list[PRPoint]:
    """Threshold sweep at every distinct score; tied scores enter all at once."""
    n_truth = int(labels.sum())
    if n_truth == 0:
        raise ValueError("ground truth is empty")
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    labels = labels[order]
    tp_cum = np.cumsum(labels)
    points = []
    for idx in range(len(scores)):
        if idx + 1 < len(scores) and scores[idx + 1] == scores[idx]:
            continue  # not the last of a tie group
        tp = tp_cum[idx]
        n_pred = idx + 1
        points.append(PRPoint(precision=tp / n_pred, recall=tp / n_truth,
                              threshold=float(scores[idx])))
    return points


def pr_curve(preds: list[JoinPrediction], truth_pairs: set[tuple[int, int]]) -> list[PRPoint]:
    if not truth_pairs:
        raise ValueError("ground truth is empty")
    scores = np.array([p.score for p in preds])
    labels = np.array([1.0 if (min(p.node_a, p.node_b), max(p.node_a, p.node_b)) in truth_pairs
                       else 0.0 for p in preds])
    found = int(labels.sum())
    if found < len(truth_pairs):
        raise ValueError(f"{len(truth_pairs) - found} ground-truth pairs missing from predictions")
    return pr_curve_from_scores(scores, labels)


def best_f1(curve: list[PRPoint]) -> float:
    best = 0.0
    for pt in curve:
        if pt.precision + pt.recall > 0:
            best = max(best, 2 * pt.precision * pt.recall / (pt.precision + pt.recall))
    return best


def pr_auc(curve: list[PRPoint]) -> float:
    """Trapezoid over recall, extended to recall 0 at the first point's precision."""
    if not curve:
        raise ValueError("empty PR curve")
    recalls = [0.0] + [pt.recall for pt in curve]
    precisions = [curve[0].precision] + [pt.precision for pt in curve]
    area = 0.0
    for i in range(1, len(recalls)):
        area += 0.5 * (precisions[i] + precisions[i - 1]) * (recalls[i] - recalls[i - 1])
    return area


# ---------------------------------------------------------------------------
# Baselines

def threshold_baseline(records: list[SimilarityRecord], signal: SignalType,
                       truth_pairs: set[tuple[int, int]]) -> list[PRPoint]:
    """PR curve using one raw similarity signal as the joinability score."""
    preds = [JoinPrediction(r.node_a, r.node_b, r.scores[signal]) for r in records]
    preds.sort(key=lambda p: (-p.score, p.node_a, p.node_b))
    return pr_curve(preds, truth_pairs)


class SimilarityMlp:
    """Shallow MLP on the 5 similarity scores: the learned non-graph comparator."""

    def __init__(self, hidden: int = 32, seed: int = 0):
        rng = np.random.RandomState(seed)
        self.params = {
            "W1": xavier_uniform((hidden, len(ALL_SIGNALS)), rng),
            "b1": np.zeros(hidden),
            "w2": xavier_uniform((1, hidden), rng)[0],
            "b2": np.zeros(1),
        }

    def raw_scores(self, X: np.ndarray):
        p = self.params
        A1 = X @ p["W1"].T + p["b1"]
        U = sigmoid(A1)
        s = U @ p["w2"] + p["b2"][0]
        return s, U

    def scores(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.raw_scores(X)[0])

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray, w_p: float,
                       want_grads: bool = True):
        s, U = self.raw_scores(X)
        sig = sigmoid(s)
        eps = 1e-12
        loss = float(-(w_p * y * np.log(sig + eps) + (1 - y) * np.log(1 - sig + eps)).sum())
        if not want_grads:
            return loss, None
        ds = np.where(y == 1, w_p * (sig - 1.0), sig)
        dU = ds[:, None] * self.params["w2"]
        dA1 = dU * U * (1.0 - U)
        grads = {
            "W1": dA1.T @ X,
            "b1": dA1.sum(axis=0),
            "w2": ds @ U,
            "b2": np.array([ds.sum()]),
        }
        return loss, grads


def train_mlp_baseline(fab_records: list[SimilarityRecord], examples: list[JoinExample],
                       epochs: int = 30, lr: float = 0.001,
                       seed: int = 0) -> tuple[SimilarityMlp, list[float]]:
    by_pair = {(r.node_a, r.node_b): r for r in fab_records}
    rows, labels = [], []
    for ex in examples:
        key = (min(ex.node_a, ex.node_b), max(ex.node_a, ex.node_b))
        rec = by_pair.get(key)
        if rec is None:
            continue
        rows.append([rec.scores[s] for s in ALL_SIGNALS])
        labels.append(ex.label)
    X = np.array(rows)
    y = np.array(labels, dtype=float)
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("MLP baseline needs both positive and negative examples")
    w_p = (len(y) - n_pos) / n_pos

    mlp = SimilarityMlp(seed=seed)
    adam = AdamState(lr=lr)
    history = []
    for _ in range(epochs):
        loss, grads = mlp.loss_and_grads(X, y, w_p)
        history.append(loss)
        adam_step(mlp.params, grads, adam)
    return mlp, history


def mlp_baseline(fab_records: list[SimilarityRecord], examples: list[JoinExample],
                 eval_records: list[SimilarityRecord],
                 truth_pairs: set[tuple[int, int]],
                 epochs: int = 30, seed: int = 0) -> list[PRPoint]:
    mlp, _ = train_mlp_baseline(fab_records, examples, epochs=epochs, seed=seed)
    X = np.array([[r.scores[s] for s in ALL_SIGNALS] for r in eval_records])
    scores = mlp.scores(X)
    preds = [JoinPrediction(r.node_a, r.node_b, float(s)) for r, s in zip(eval_records, scores)]
    preds.sort(key=lambda p: (-p.score, p.node_a, p.node_b))
    return pr_curve(preds, truth_pairs)


def save_predictions(preds: list[JoinPrediction], repo: Repository, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["table_a", "column_a", "table_b", "column_b", "score"])
        for p in preds:
            ca, cb = repo.columns[p.node_a], repo.columns[p.node_b]
            w.writerow([ca.table_id, ca.name, cb.table_id, cb.name, f"{p.score:.9f}"])
