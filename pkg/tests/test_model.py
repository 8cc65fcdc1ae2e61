import numpy as np
import pytest

from conftest import gradient_max_rel_err, repo_from_columns
from joinscope.embedding import TrigramHashEmbedder
from joinscope.fabricate import FabricationConfig, JoinExample, generate_training_set
from joinscope.graph import build_graph
from joinscope.model import (
    RgcnModel,
    TrainConfig,
    build_triplets,
    ce_loss,
    fit,
    forward,
    load_model,
    save_model,
    score_pair,
    score_pairs,
    split_examples,
    train,
    train_on_graph,
    triplet_loss,
)
from joinscope.similarity import ALL_SIGNALS, SimilarityRecord
from joinscope.tensor import finite_diff, sigmoid


def zero_model(d_f=3, d_h=4, layers=2, loss_mode="triplet"):
    model = RgcnModel(d_f=d_f, d_h=d_h, layers=layers, loss_mode=loss_mode)
    for v in model.params.values():
        v[...] = 0.0
    return model


def random_instance(rng, n_nodes=6, d_f=5, d_h=4, k=2):
    """Random cross-table similarity records with every relation populated."""
    records = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            scores = {s: float(rng.rand() * 0.9 + 0.05) for s in ALL_SIGNALS}
            records.append(SimilarityRecord(i, j, scores))
    g = build_graph(records, k, n_nodes=n_nodes)
    X = rng.randn(n_nodes, d_f)
    return g, X


def reference_forward(model, g, X):
    """Loop-based re-derivation of the message-passing update, used as an oracle."""
    p = model.params
    n = X.shape[0]
    Xs = np.stack([x / max(np.linalg.norm(x), 1e-12) for x in X])
    H = np.stack([p["W_in"] @ Xs[i] + p["b_in"] for i in range(n)])
    for layer in range(1, model.layers + 1):
        new_H = H.copy()
        for i in range(n):
            degree = sum(len(g.adjacency[rel][i]) for rel in ALL_SIGNALS)
            pre = np.zeros(model.d_h)
            for r, rel in enumerate(ALL_SIGNALS):
                nbrs = g.adjacency[rel][i]
                if nbrs:
                    msgs = [p[f"W{layer}_r{r}"] @ H[j] + p[f"b{layer}_r{r}"] for j in nbrs]
                    pre += np.mean(msgs, axis=0)
            if degree > 0:
                pre += p[f"W{layer}_self"] @ H[i] + p[f"b{layer}_self"]
            new_H[i] = H[i] + sigmoid(pre)
        H = new_H
    return H


class TestForward:
    def test_zero_weights_isolated_node_forced_value(self):
        for layers in (1, 2, 3):
            model = zero_model(layers=layers)
            g = build_graph([], 1, n_nodes=2)
            H = forward(model, g, np.ones((2, 3)))
            assert np.all(H == layers * 0.5)

    def test_matches_loop_reference(self, rng):
        for _ in range(5):
            g, X = random_instance(rng)
            model = RgcnModel(d_f=5, d_h=4, seed=rng.randint(1000))
            np.testing.assert_allclose(forward(model, g, X), reference_forward(model, g, X),
                                       atol=1e-10)

    def test_permutation_equivariance(self, rng):
        n = 7
        records = []
        for i in range(n):
            for j in range(i + 1, n):
                scores = {s: float(rng.rand()) for s in ALL_SIGNALS}
                records.append(SimilarityRecord(i, j, scores))
        X = rng.randn(n, 5)
        model = RgcnModel(d_f=5, d_h=4)
        perm = rng.permutation(n)
        remapped = [SimilarityRecord(min(perm[r.node_a], perm[r.node_b]),
                                     max(perm[r.node_a], perm[r.node_b]),
                                     r.scores) for r in records]
        H = forward(model, build_graph(records, 2, n_nodes=n), X)
        Xp = np.empty_like(X)
        Xp[perm] = X
        Hp = forward(model, build_graph(remapped, 2, n_nodes=n), Xp)
        np.testing.assert_allclose(Hp[perm], H, atol=1e-10)

    def test_feature_shape_mismatch_rejected(self):
        model = RgcnModel(d_f=3, d_h=4)
        g = build_graph([], 1, n_nodes=2)
        with pytest.raises(ValueError, match="feature matrix shape"):
            forward(model, g, np.ones((2, 5)))

    def test_edge_change_is_local(self, rng):
        # path 0-1-2-3-4-5 in one relation; dropping (4,5) must not move nodes 0, 1
        def path_records(last_edge):
            pairs = [(0, 1), (1, 2), (2, 3), (3, 4)] + ([(4, 5)] if last_edge else [])
            records = []
            for a, b in pairs:
                scores = {s: 0.0 for s in ALL_SIGNALS}
                scores[ALL_SIGNALS[0]] = 0.9
                records.append(SimilarityRecord(a, b, scores))
            return records

        X = rng.randn(6, 5)
        model = RgcnModel(d_f=5, d_h=4, layers=2)
        H_full = forward(model, build_graph(path_records(True), 5, n_nodes=6), X)
        H_cut = forward(model, build_graph(path_records(False), 5, n_nodes=6), X)
        np.testing.assert_allclose(H_cut[:2], H_full[:2], atol=1e-12)
        assert not np.allclose(H_cut[4], H_full[4])
        assert not np.allclose(H_cut[5], H_full[5])


class TestScoring:
    def test_triplet_score_is_inverse_distance(self):
        model = RgcnModel(d_f=3, d_h=2, loss_mode="triplet")
        h_a, h_b = np.array([0.0, 0.0]), np.array([3.0, 4.0])
        assert score_pair(model, h_a, h_b) == pytest.approx(1.0 / 6.0)
        assert score_pair(model, h_a, h_a) == 1.0

    def test_scores_symmetric(self, rng):
        for mode in ("triplet", "cross_entropy"):
            model = RgcnModel(d_f=3, d_h=4, loss_mode=mode)
            HA, HB = rng.randn(10, 4), rng.randn(10, 4)
            np.testing.assert_allclose(score_pairs(model, HA, HB),
                                       score_pairs(model, HB, HA), atol=1e-12)

    def test_scores_in_unit_interval(self, rng):
        for mode in ("triplet", "cross_entropy"):
            model = RgcnModel(d_f=3, d_h=4, loss_mode=mode)
            s = score_pairs(model, rng.randn(20, 4) * 5, rng.randn(20, 4) * 5)
            assert np.all((s >= 0) & (s <= 1))


class TestLosses:
    def test_ce_zero_weight_closed_form(self):
        model = zero_model(d_f=3, d_h=4, loss_mode="cross_entropy")
        g = build_graph([], 1, n_nodes=4)
        X = np.ones((4, 3))
        J, NJ = [(0, 1)], [(0, 2), (0, 3), (1, 2)]
        w_p = len(NJ) / len(J)
        loss, _ = ce_loss(model, g, X, J, NJ, want_grads=False)
        assert loss == pytest.approx((w_p * len(J) + len(NJ)) * np.log(2), abs=1e-9)

    def test_ce_needs_both_classes(self):
        model = zero_model(loss_mode="cross_entropy")
        g = build_graph([], 1, n_nodes=2)
        with pytest.raises(ValueError):
            ce_loss(model, g, np.ones((2, 3)), [(0, 1)], [])

    def test_triplet_equal_distances_cost_margin(self):
        model = zero_model(d_f=3, d_h=4, layers=2, loss_mode="triplet")
        g = build_graph([], 1, n_nodes=3)
        X = np.ones((3, 3))
        # zero weights make all representations identical: d1 = d2 = 0
        loss, grads = triplet_loss(model, g, X, [(0, 1, 2), (1, 0, 2)])
        assert loss == pytest.approx(2 * model.margin)
        for v in grads.values():
            assert np.all(v == 0)  # subgradient at coincident points

    def test_triplet_empty_is_zero(self):
        model = zero_model()
        g = build_graph([], 1, n_nodes=2)
        loss, grads = triplet_loss(model, g, np.ones((2, 3)), [])
        assert loss == 0.0
        assert all(np.all(v == 0) for v in grads.values())

    def test_ce_gradient_matches_finite_differences(self, rng):
        g, X = random_instance(rng)
        model = RgcnModel(d_f=5, d_h=4, loss_mode="cross_entropy", seed=1)
        J, NJ = [(0, 1), (2, 3)], [(0, 2), (1, 4), (3, 5)]
        _, grads = ce_loss(model, g, X, J, NJ)
        numeric = finite_diff(lambda p: ce_loss(model, g, X, J, NJ, want_grads=False)[0],
                              model.params)
        assert gradient_max_rel_err(grads, numeric) < 1e-4

    def test_triplet_gradient_matches_finite_differences(self, rng):
        g, X = random_instance(rng)
        model = RgcnModel(d_f=5, d_h=4, loss_mode="triplet", seed=2)
        H = forward(model, g, X)
        candidates = [(0, 1, 2), (1, 2, 3), (3, 4, 5), (5, 0, 2), (2, 5, 1)]
        tri = []
        for a, p_, n_ in candidates:
            term = (np.linalg.norm(H[a] - H[p_]) - np.linalg.norm(H[a] - H[n_])
                    + model.margin)
            if abs(term) > 1e-2:  # keep away from the hinge kink
                tri.append((a, p_, n_))
        assert tri
        _, grads = triplet_loss(model, g, X, tri)
        numeric = finite_diff(lambda p: triplet_loss(model, g, X, tri, want_grads=False)[0],
                              model.params)
        assert gradient_max_rel_err(grads, numeric) < 1e-4


class TestTriplets:
    def test_anchors_from_both_endpoints(self):
        J = [JoinExample(0, 1, 1, "t")]
        NJ = [JoinExample(0, 2, 0, "t"), JoinExample(1, 3, 0, "t")]
        tri = build_triplets(J, NJ)
        assert (0, 1, 2) in tri
        assert (1, 0, 3) in tri
        assert len(tri) == 2

    def test_per_anchor_cap(self, rng):
        J = [JoinExample(0, 1, 1, "t")]
        NJ = [JoinExample(0, j, 0, "t") for j in range(2, 40)]
        tri = build_triplets(J, NJ, per_anchor_cap=5, rng=rng)
        with_anchor_0 = [t for t in tri if t[0] == 0]
        assert len(with_anchor_0) == 5

    def test_deterministic_given_rng_seed(self):
        J = [JoinExample(0, 1, 1, "t")]
        NJ = [JoinExample(0, j, 0, "t") for j in range(2, 40)]
        a = build_triplets(J, NJ, per_anchor_cap=5, rng=np.random.RandomState(3))
        b = build_triplets(J, NJ, per_anchor_cap=5, rng=np.random.RandomState(3))
        assert a == b


class TestSplit:
    def _examples(self, n_pos=10, n_neg=30):
        pos = [JoinExample(i, 100 + i, 1, "t") for i in range(n_pos)]
        neg = [JoinExample(i, 200 + i, 0, "t") for i in range(n_neg)]
        return pos + neg

    def test_stratified_fractions(self, rng):
        pos_tr, neg_tr, pos_val, neg_val = split_examples(self._examples(), 0.1, rng)
        assert len(pos_val) == 1 and len(neg_val) == 3
        assert len(pos_tr) == 9 and len(neg_tr) == 27

    def test_no_overlap_and_no_loss(self, rng):
        examples = self._examples()
        parts = split_examples(examples, 0.2, rng)
        flat = [ex for part in parts for ex in part]
        assert len(flat) == len(examples)
        assert len({(ex.node_a, ex.node_b) for ex in flat}) == len(examples)

    def test_degenerate_split_rejected(self, rng):
        only_pos = [JoinExample(0, 1, 1, "t"), JoinExample(2, 3, 1, "t")]
        with pytest.raises(ValueError, match="degenerate"):
            split_examples(only_pos, 0.1, rng)


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(validation_fraction=1.5)
        with pytest.raises(ValueError):
            TrainConfig(loss_mode="nope")


def tiny_repo(n_tables=3, n_rows=12):
    tables = {}
    for t in range(n_tables):
        shared = [f"key{r}" for r in range(n_rows)]
        tables[f"t{t}"] = {
            "key": shared,
            "extra": [f"e{t}_{r}" for r in range(n_rows)],
        }
    return repo_from_columns(tables)


SMALL_CFG = dict(epochs=3, hidden_dim=8, k_candidates=(1,), validation_fraction=0.25)


class TestTraining:
    def test_history_records_train_and_val_loss(self):
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        result = fit(fab_repo, examples, TrainConfig(**SMALL_CFG), TrigramHashEmbedder(dim=16))
        assert len(result.history) == 3
        for entry in result.history:
            assert set(entry) == {"train_loss", "val_loss"}
            assert np.isfinite(entry["train_loss"]) and np.isfinite(entry["val_loss"])

    def test_fit_attaches_k_and_normalizer(self):
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        result = fit(fab_repo, examples, TrainConfig(**SMALL_CFG), TrigramHashEmbedder(dim=16))
        assert result.model.k == result.k == 1
        assert result.model.normalizer is not None
        assert set(result.per_k_f1) == {1}

    def test_k_ties_select_smallest(self, monkeypatch):
        import joinscope.model as model_mod
        monkeypatch.setattr(model_mod, "_validation_best_f1",
                            lambda *args, **kwargs: 0.5)
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        cfg = TrainConfig(**{**SMALL_CFG, "k_candidates": (3, 1, 2)})
        result = model_mod.fit(fab_repo, examples, cfg, TrigramHashEmbedder(dim=16))
        assert result.k == 1

    def test_deterministic_under_seed(self):
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        cfg = TrainConfig(**SMALL_CFG, seed=5)
        r1 = fit(fab_repo, examples, cfg, TrigramHashEmbedder(dim=16))
        r2 = fit(fab_repo, examples, cfg, TrigramHashEmbedder(dim=16))
        for name in r1.model.params:
            np.testing.assert_array_equal(r1.model.params[name], r2.model.params[name])
        assert r1.history == r2.history

    def test_loss_decreases_both_modes(self):
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        for mode in ("triplet", "cross_entropy"):
            cfg = TrainConfig(**{**SMALL_CFG, "epochs": 15}, loss_mode=mode)
            result = fit(fab_repo, examples, cfg, TrigramHashEmbedder(dim=16))
            assert result.history[-1]["train_loss"] < result.history[0]["train_loss"]


class TestCheckpoint:
    def test_round_trip_preserves_model(self, tmp_path):
        repo = tiny_repo()
        fab_repo, examples = generate_training_set(repo, FabricationConfig())
        cfg = TrainConfig(**SMALL_CFG)
        model, _ = train(fab_repo, examples, cfg, TrigramHashEmbedder(dim=16), k=1)
        path = tmp_path / "model.npz"
        save_model(model, path)
        back = load_model(path)
        assert back.k == model.k
        assert back.loss_mode == model.loss_mode
        assert (back.d_f, back.d_h, back.layers) == (model.d_f, model.d_h, model.layers)
        for name in model.params:
            np.testing.assert_array_equal(back.params[name], model.params[name])
        np.testing.assert_array_equal(back.normalizer.mean, model.normalizer.mean)
        np.testing.assert_array_equal(back.normalizer.scale, model.normalizer.scale)
        assert back.normalizer.clip == model.normalizer.clip
