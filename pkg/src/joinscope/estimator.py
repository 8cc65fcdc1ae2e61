"""Estimator-style wrapper so join discovery composes with sklearn-style pipelines."""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator

from joinscope.embedding import TrigramHashEmbedder
from joinscope.fabricate import FabricationConfig, generate_training_set
from joinscope.model import TrainConfig, fit as fit_model
from joinscope.predict import JoinPrediction, infer
from joinscope.repo import Repository, load_repository


class JoinDiscovery(BaseEstimator):
    """Fit on a repository of tables, then predict joinability scores for column pairs.

    `fit` fabricates self-supervised join examples from the input tables, trains the
    relational GCN (selecting the top-k edge budget on a validation split), and stores
    the trained model. `predict` scores all cross-table column pairs of a repository.
    """

    def __init__(self, epochs: int = 30, lr: float = 0.001, loss_mode: str = "triplet",
                 margin: float = 1.0, hidden_dim: int = 256, layers: int = 2,
                 k_candidates: tuple[int, ...] = (1, 2, 3, 4, 5),
                 p_fuzzy_pair: float = 0.5, p_perturb_value: float = 0.3,
                 embedding_dim: int = 64, seed: int = 0):
        self.epochs = epochs
        self.lr = lr
        self.loss_mode = loss_mode
        self.margin = margin
        self.hidden_dim = hidden_dim
        self.layers = layers
        self.k_candidates = k_candidates
        self.p_fuzzy_pair = p_fuzzy_pair
        self.p_perturb_value = p_perturb_value
        self.embedding_dim = embedding_dim
        self.seed = seed

    def _as_repo(self, data) -> Repository:
        if isinstance(data, Repository):
            return data
        return load_repository(Path(data))

    def fit(self, data, y=None):
        repo = self._as_repo(data)
        embedder = TrigramHashEmbedder(dim=self.embedding_dim)
        fab_cfg = FabricationConfig(p_fuzzy_pair=self.p_fuzzy_pair,
                                    p_perturb_value=self.p_perturb_value, seed=self.seed)
        fab_repo, examples = generate_training_set(repo, fab_cfg)
        train_cfg = TrainConfig(epochs=self.epochs, lr=self.lr, loss_mode=self.loss_mode,
                                margin=self.margin, hidden_dim=self.hidden_dim,
                                layers=self.layers, k_candidates=tuple(self.k_candidates),
                                seed=self.seed)
        result = fit_model(fab_repo, examples, train_cfg, embedder)
        self.model_ = result.model
        self.history_ = result.history
        self.k_ = result.k
        self.embedder_ = embedder
        return self

    def predict(self, data) -> list[JoinPrediction]:
        if not hasattr(self, "model_"):
            raise ValueError("estimator is not fitted")
        return infer(self.model_, self._as_repo(data), self.embedder_)
