"""Relational GCN join-prediction model: forward pass, losses, analytic gradients, training.

The forward pass per layer computes, for node i and relation r with neighbor set N_i^r,
messages (1/|N_i^r|)(W_r h_j + b_r) + (1/D_i)(W_0 h_i + b_0) where D_i is the total degree,
sums them over relations and neighbors through a sigmoid, and adds the result onto the
previous representation (residual update). Because the self term carries coefficient 1/D_i
and appears once per neighbor message, the self contributions total exactly one
W_0 h_i + b_0 for any node with D_i > 0; isolated nodes receive sigmoid(0) = 0.5.

Input features (588-dim profiles) are first mapped through a learned linear projection to
the hidden width so the residual update is well-typed.

Training is full-batch Adam, deterministic under a fixed seed, with either a weighted
cross-entropy loss over an MLP scoring head or a triplet margin loss on embedding
distances. Gradients are derived by hand and checked against finite differences in tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from joinscope.fabricate import JoinExample
from joinscope.graph import SimilarityGraph, build_graph
from joinscope.profile import ProfileNormalizer, profile_repository, fit_normalizer
from joinscope.repo import Repository
from joinscope.similarity import ALL_SIGNALS, SimilarityRecord, compute_all_pairs
from joinscope.tensor import AdamState, adam_step, sigmoid, xavier_uniform

N_RELATIONS = len(ALL_SIGNALS)


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 0.001
    validation_fraction: float = 0.1
    k_candidates: tuple[int, ...] = (1, 2, 3, 4, 5)
    seed: int = 0
    loss_mode: str = "triplet"  # "triplet" | "cross_entropy"
    margin: float = 1.0
    hidden_dim: int = 256
    layers: int = 2
    per_anchor_cap: int = 20

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.loss_mode not in ("triplet", "cross_entropy"):
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}")


class RgcnModel:
    """Parameter container plus forward/backward passes."""

    def __init__(self, d_f: int, d_h: int = 256, layers: int = 2,
                 loss_mode: str = "triplet", margin: float = 1.0, seed: int = 0):
        self.d_f = d_f
        self.d_h = d_h
        self.layers = layers
        self.loss_mode = loss_mode
        self.margin = margin
        self.k: int | None = None
        self.normalizer: ProfileNormalizer | None = None

        rng = np.random.RandomState(seed)
        p: dict[str, np.ndarray] = {}
        p["W_in"] = xavier_uniform((d_h, d_f), rng)
        p["b_in"] = np.zeros(d_h)
        for layer in range(1, layers + 1):
            for r in range(N_RELATIONS):
                p[f"W{layer}_r{r}"] = xavier_uniform((d_h, d_h), rng)
                p[f"b{layer}_r{r}"] = np.zeros(d_h)
            p[f"W{layer}_self"] = xavier_uniform((d_h, d_h), rng)
            p[f"b{layer}_self"] = np.zeros(d_h)
        if loss_mode == "cross_entropy":
            p["head_W1"] = xavier_uniform((d_h, 2 * d_h), rng)
            p["head_b1"] = np.zeros(d_h)
            p["head_w2"] = xavier_uniform((1, d_h), rng)[0]
            p["head_b2"] = np.zeros(1)
        self.params = p

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(v) for name, v in self.params.items()}


def graph_operators(g: SimilarityGraph) -> dict:
    """Dense per-relation mean-aggregation matrices plus self-term coefficients."""
    n = g.n_nodes
    ops = {"A": [], "rowmask": []}
    degree = np.zeros(n)
    for rel in ALL_SIGNALS:
        A = np.zeros((n, n))
        mask = np.zeros(n)
        for i in range(n):
            nbrs = g.adjacency[rel][i]
            if nbrs:
                A[i, nbrs] = 1.0 / len(nbrs)
                mask[i] = 1.0
                degree[i] += len(nbrs)
        ops["A"].append(A)
        ops["rowmask"].append(mask)
    ops["self_coeff"] = (degree > 0).astype(float)
    return ops


def forward(model: RgcnModel, g: SimilarityGraph, X: np.ndarray,
            ops: dict | None = None, cache: dict | None = None) -> np.ndarray:
    """Node representations after `model.layers` rounds of message passing."""
    if X.shape != (g.n_nodes, model.d_f):
        raise ValueError(f"feature matrix shape {X.shape}, expected ({g.n_nodes}, {model.d_f})")
    if ops is None:
        ops = graph_operators(g)
    p = model.params
    # scale inputs so initial embedding distances are O(1): the triplet margin and the
    # per-layer sigmoid messages then operate on comparable magnitudes
    X = X / np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    H = X @ p["W_in"].T + p["b_in"]
    if cache is not None:
        cache["X"] = X
        cache["ops"] = ops
        cache["layers"] = []
    c0 = ops["self_coeff"][:, None]
    for layer in range(1, model.layers + 1):
        pre = c0 * (H @ p[f"W{layer}_self"].T + p[f"b{layer}_self"])
        for r in range(N_RELATIONS):
            AH = ops["A"][r] @ H
            pre += AH @ p[f"W{layer}_r{r}"].T + ops["rowmask"][r][:, None] * p[f"b{layer}_r{r}"]
        M = sigmoid(pre)
        if cache is not None:
            cache["layers"].append({"H_prev": H, "M": M})
        H = H + M
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("non-finite node representations")
    return H


def backward(model: RgcnModel, cache: dict, dH: np.ndarray,
             grads: dict[str, np.ndarray]) -> None:
    """Accumulate parameter gradients given dLoss/dH at the top layer."""
    p = model.params
    ops = cache["ops"]
    c0 = ops["self_coeff"][:, None]
    for layer in range(model.layers, 0, -1):
        lc = cache["layers"][layer - 1]
        H_prev, M = lc["H_prev"], lc["M"]
        G = dH * M * (1.0 - M)
        Gc = c0 * G
        grads[f"W{layer}_self"] += Gc.T @ H_prev
        grads[f"b{layer}_self"] += Gc.sum(axis=0)
        dH_msg = Gc @ p[f"W{layer}_self"]
        for r in range(N_RELATIONS):
            AH = ops["A"][r] @ H_prev
            grads[f"W{layer}_r{r}"] += G.T @ AH
            grads[f"b{layer}_r{r}"] += ops["rowmask"][r] @ G
            dH_msg += ops["A"][r].T @ (G @ p[f"W{layer}_r{r}"])
        dH = dH + dH_msg
    grads["W_in"] += dH.T @ cache["X"]
    grads["b_in"] += dH.sum(axis=0)


# ---------------------------------------------------------------------------
# Scoring

def _head_forward(model: RgcnModel, HA: np.ndarray, HB: np.ndarray):
    p = model.params
    P = HA * HB
    Q = np.abs(HA - HB)
    Z = np.concatenate([P, Q], axis=1)
    A1 = Z @ p["head_W1"].T + p["head_b1"]
    U = sigmoid(A1)
    s = U @ p["head_w2"] + p["head_b2"][0]
    return s, (P, Q, Z, U)


def _head_backward(model: RgcnModel, HA, HB, aux, ds, grads, dHA, dHB):
    p = model.params
    P, Q, Z, U = aux
    dU = ds[:, None] * p["head_w2"]
    dA1 = dU * U * (1.0 - U)
    grads["head_W1"] += dA1.T @ Z
    grads["head_b1"] += dA1.sum(axis=0)
    grads["head_w2"] += ds @ U
    grads["head_b2"] += np.array([ds.sum()])
    dZ = dA1 @ p["head_W1"]
    d = model.d_h
    dP, dQ = dZ[:, :d], dZ[:, d:]
    sign = np.sign(HA - HB)
    dHA += dP * HB + dQ * sign
    dHB += dP * HA - dQ * sign


def score_pair(model: RgcnModel, h_a: np.ndarray, h_b: np.ndarray) -> float:
    return float(score_pairs(model, h_a[None, :], h_b[None, :])[0])


def score_pairs(model: RgcnModel, HA: np.ndarray, HB: np.ndarray) -> np.ndarray:
    """Joinability scores in [0, 1]; symmetric in the two arguments."""
    if model.loss_mode == "cross_entropy":
        s, _ = _head_forward(model, HA, HB)
        return sigmoid(s)
    dist = np.linalg.norm(HA - HB, axis=1)
    return 1.0 / (1.0 + dist)


# ---------------------------------------------------------------------------
# Losses

def ce_loss(model: RgcnModel, g: SimilarityGraph, X: np.ndarray,
            J: list[tuple[int, int]], NJ: list[tuple[int, int]],
            ops: dict | None = None, want_grads: bool = True):
    """Weighted cross-entropy over the MLP head; w_p = |NJ| / |J|."""
    if not J or not NJ:
        raise ValueError("cross-entropy loss needs both positive and negative examples")
    w_p = len(NJ) / len(J)
    cache: dict | None = {} if want_grads else None
    H = forward(model, g, X, ops=ops, cache=cache)

    pairs = np.array(J + NJ)
    labels = np.concatenate([np.ones(len(J)), np.zeros(len(NJ))])
    HA, HB = H[pairs[:, 0]], H[pairs[:, 1]]
    s, aux = _head_forward(model, HA, HB)
    sig = sigmoid(s)
    eps = 1e-12
    loss = float(-(w_p * labels * np.log(sig + eps)
                   + (1 - labels) * np.log(1 - sig + eps)).sum())
    if not want_grads:
        return loss, None

    ds = np.where(labels == 1, w_p * (sig - 1.0), sig)
    grads = model.zero_grads()
    dHA = np.zeros_like(HA)
    dHB = np.zeros_like(HB)
    _head_backward(model, HA, HB, aux, ds, grads, dHA, dHB)
    dH = np.zeros_like(H)
    np.add.at(dH, pairs[:, 0], dHA)
    np.add.at(dH, pairs[:, 1], dHB)
    backward(model, cache, dH, grads)
    return loss, grads


def triplet_loss(model: RgcnModel, g: SimilarityGraph, X: np.ndarray,
                 triplets: list[tuple[int, int, int]],
                 ops: dict | None = None, want_grads: bool = True):
    """Hinge over Euclidean distances d(anchor, pos) - d(anchor, neg) + margin."""
    cache: dict | None = {} if want_grads else None
    H = forward(model, g, X, ops=ops, cache=cache)
    if not triplets:
        return 0.0, (model.zero_grads() if want_grads else None)

    tri = np.array(triplets)
    DA_P = H[tri[:, 0]] - H[tri[:, 1]]
    DA_N = H[tri[:, 0]] - H[tri[:, 2]]
    d1 = np.linalg.norm(DA_P, axis=1)
    d2 = np.linalg.norm(DA_N, axis=1)
    terms = d1 - d2 + model.margin
    active = terms > 0
    loss = float(terms[active].sum())
    if not want_grads:
        return loss, None

    # unit direction vectors; subgradient 0 at coincident points
    u1 = np.where((d1 > 0)[:, None], DA_P / np.where(d1 > 0, d1, 1.0)[:, None], 0.0)
    u2 = np.where((d2 > 0)[:, None], DA_N / np.where(d2 > 0, d2, 1.0)[:, None], 0.0)
    w = active.astype(float)[:, None]
    dH = np.zeros_like(H)
    np.add.at(dH, tri[:, 0], w * (u1 - u2))
    np.add.at(dH, tri[:, 1], -w * u1)
    np.add.at(dH, tri[:, 2], w * u2)
    grads = model.zero_grads()
    backward(model, cache, dH, grads)
    return loss, grads


def build_triplets(J: list[JoinExample], NJ: list[JoinExample],
                   per_anchor_cap: int = 20,
                   rng: np.random.RandomState | None = None) -> list[tuple[int, int, int]]:
    """(anchor, joining, non-joining) triples from each fabricated pair's label partition."""
    if rng is None:
        rng = np.random.RandomState(0)
    neg_partners: dict[int, list[int]] = {}
    for ex in NJ:
        neg_partners.setdefault(ex.node_a, []).append(ex.node_b)
        neg_partners.setdefault(ex.node_b, []).append(ex.node_a)
    triplets = []
    for ex in J:
        for anchor, positive in ((ex.node_a, ex.node_b), (ex.node_b, ex.node_a)):
            cands = sorted(neg_partners.get(anchor, []))
            if len(cands) > per_anchor_cap:
                idx = rng.choice(len(cands), size=per_anchor_cap, replace=False)
                cands = [cands[i] for i in sorted(idx)]
            triplets.extend((anchor, positive, c) for c in cands)
    return triplets


# ---------------------------------------------------------------------------
# Training

def split_examples(examples: list[JoinExample], validation_fraction: float,
                   rng: np.random.RandomState):
    """Stratified-by-label train/validation split."""
    pos = [ex for ex in examples if ex.label == 1]
    neg = [ex for ex in examples if ex.label == 0]
    out = {}
    for name, group in (("pos", pos), ("neg", neg)):
        group = list(group)
        order = rng.permutation(len(group))
        n_val = int(round(validation_fraction * len(group)))
        n_val = min(max(n_val, 1), len(group) - 1) if len(group) >= 2 else 0
        val_idx = set(order[:n_val].tolist())
        out[name + "_train"] = [group[i] for i in range(len(group)) if i not in val_idx]
        out[name + "_val"] = [group[i] for i in range(len(group)) if i in val_idx]
    if not out["pos_train"] or not out["pos_val"] or not out["neg_train"] or not out["neg_val"]:
        raise ValueError("degenerate train/validation split: a fold has no positives or negatives")
    return out["pos_train"], out["neg_train"], out["pos_val"], out["neg_val"]


def _pairs(examples: list[JoinExample]) -> list[tuple[int, int]]:
    return [(ex.node_a, ex.node_b) for ex in examples]


def train_on_graph(g: SimilarityGraph, X: np.ndarray, examples: list[JoinExample],
                   cfg: TrainConfig) -> tuple[RgcnModel, list[dict]]:
    """Full-batch Adam training of a fresh model on one similarity graph."""
    model = RgcnModel(d_f=X.shape[1], d_h=cfg.hidden_dim, layers=cfg.layers,
                      loss_mode=cfg.loss_mode, margin=cfg.margin, seed=cfg.seed)
    rng = np.random.RandomState(cfg.seed)
    pos_tr, neg_tr, pos_val, neg_val = split_examples(examples, cfg.validation_fraction, rng)
    ops = graph_operators(g)
    adam = AdamState(lr=cfg.lr)
    history = []

    if cfg.loss_mode == "triplet":
        tri_train = build_triplets(pos_tr, neg_tr, cfg.per_anchor_cap, rng)
        tri_val = build_triplets(pos_val, neg_val, cfg.per_anchor_cap, rng)
        for _ in range(cfg.epochs):
            loss, grads = triplet_loss(model, g, X, tri_train, ops=ops)
            val_loss, _ = triplet_loss(model, g, X, tri_val, ops=ops, want_grads=False)
            history.append({"train_loss": loss, "val_loss": val_loss})
            adam_step(model.params, grads, adam)
    else:
        J_tr, NJ_tr = _pairs(pos_tr), _pairs(neg_tr)
        J_val, NJ_val = _pairs(pos_val), _pairs(neg_val)
        for _ in range(cfg.epochs):
            loss, grads = ce_loss(model, g, X, J_tr, NJ_tr, ops=ops)
            val_loss, _ = ce_loss(model, g, X, J_val, NJ_val, ops=ops, want_grads=False)
            history.append({"train_loss": loss, "val_loss": val_loss})
            adam_step(model.params, grads, adam)

    model._val_examples = pos_val + neg_val  # kept for k selection
    return model, history


def _validation_best_f1(model: RgcnModel, g: SimilarityGraph, X: np.ndarray,
                        val_examples: list[JoinExample]) -> float:
    from joinscope.predict import pr_curve_from_scores, best_f1
    H = forward(model, g, X)
    pairs = np.array([(ex.node_a, ex.node_b) for ex in val_examples])
    scores = score_pairs(model, H[pairs[:, 0]], H[pairs[:, 1]])
    labels = np.array([ex.label for ex in val_examples])
    if labels.sum() == 0:
        return 0.0
    return best_f1(pr_curve_from_scores(scores, labels))


@dataclass
class TrainResult:
    model: RgcnModel
    history: list[dict]
    k: int
    per_k_f1: dict[int, float] = field(default_factory=dict)


def prepare_features(repo: Repository,
                     normalizer: ProfileNormalizer | None = None) -> tuple[np.ndarray, ProfileNormalizer]:
    profiles = profile_repository(repo.columns)
    if normalizer is None:
        normalizer = fit_normalizer(profiles, std_floor_fraction=0.25, clip=3.0)
    X = np.stack([normalizer.apply(p.features) for p in profiles])
    return X, normalizer


def fit(repo_fab: Repository, examples: list[JoinExample], cfg: TrainConfig,
        embedder, records: list[SimilarityRecord] | None = None) -> TrainResult:
    """Select k on the validation split, and return the model trained with that k."""
    if records is None:
        records = compute_all_pairs(repo_fab, embedder)
    X, normalizer = prepare_features(repo_fab)

    best: TrainResult | None = None
    per_k_f1: dict[int, float] = {}
    for k in sorted(cfg.k_candidates):
        g = build_graph(records, k, n_nodes=repo_fab.n_nodes)
        model, history = train_on_graph(g, X, examples, cfg)
        f1 = _validation_best_f1(model, g, X, model._val_examples)
        per_k_f1[k] = f1
        if best is None or f1 > per_k_f1[best.k]:
            best = TrainResult(model=model, history=history, k=k)
    assert best is not None
    best.per_k_f1 = per_k_f1
    best.model.k = best.k
    best.model.normalizer = normalizer
    return best


def select_k(repo_fab: Repository, examples: list[JoinExample], cfg: TrainConfig,
             embedder) -> int:
    """Validation-selected top-k edge budget (ties go to the smallest k)."""
    return fit(repo_fab, examples, cfg, embedder).k


def train(repo_fab: Repository, examples: list[JoinExample], cfg: TrainConfig,
          embedder, k: int) -> tuple[RgcnModel, list[dict]]:
    """Train with a fixed k (no selection)."""
    records = compute_all_pairs(repo_fab, embedder)
    X, normalizer = prepare_features(repo_fab)
    g = build_graph(records, k, n_nodes=repo_fab.n_nodes)
    model, history = train_on_graph(g, X, examples, cfg)
    model.k = k
    model.normalizer = normalizer
    return model, history


# ---------------------------------------------------------------------------
# Checkpointing

def save_model(model: RgcnModel, path: str | Path) -> None:
    meta = {
        "d_f": model.d_f,
        "d_h": model.d_h,
        "layers": model.layers,
        "loss_mode": model.loss_mode,
        "margin": model.margin,
        "k": model.k,
    }
    arrays = {f"param__{name}": v for name, v in model.params.items()}
    if model.normalizer is not None:
        arrays["norm_mean"] = model.normalizer.mean
        arrays["norm_scale"] = model.normalizer.scale
        arrays["norm_clip"] = np.array(model.normalizer.clip)
    with open(path, "wb") as f:
        np.savez(f, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_model(path: str | Path) -> RgcnModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        model = RgcnModel(d_f=meta["d_f"], d_h=meta["d_h"], layers=meta["layers"],
                          loss_mode=meta["loss_mode"], margin=meta["margin"])
        model.k = meta["k"]
        for key in data.files:
            if key.startswith("param__"):
                model.params[key[len("param__"):]] = data[key]
        if "norm_mean" in data.files:
            clip = float(data["norm_clip"]) if "norm_clip" in data.files else 0.0
            model.normalizer = ProfileNormalizer(mean=data["norm_mean"],
                                                 scale=data["norm_scale"], clip=clip)
    return model
