"""Training, prediction and cross-validation contracts for the classifiers."""

import numpy as np
import pytest

from voxstats.classical import (
    AlgoSpec,
    cross_validate,
    kfold_split,
    load_model,
    predict,
    save_model,
    stratified_kfold,
    train_classifier,
)
from voxstats.classical.models import DecisionTree
from voxstats.errors import ConfigError, PredictError, TrainError
from voxstats.features import FeatureTable


def blob_table(n_per_class=100, separation=10.0, seed=0, d=14):
    """Two well-separated Gaussian blobs embedded in the 14-column table."""
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, size=(n_per_class, d))
    b = rng.normal(separation, 1.0, size=(n_per_class, d))
    matrix = np.vstack([a, b])
    labels = ["Human"] * n_per_class + ["SpikAI"] * n_per_class
    return FeatureTable(matrix, labels)


class TestTrainAndPredict:
    def test_gaussian_nb_separable_blobs(self):
        table = blob_table()
        model = train_classifier(table, AlgoSpec("gaussian_nb"), "binary")
        scores, labels = model.predict_batch(table.matrix())
        truth = ["Human"] * 100 + ["Synthetic"] * 100
        assert labels == truth
        # A point at the human-class mean is called with near certainty.
        label, s = predict(model, np.zeros(14))
        assert label == "Human" and s[model.classes.index("Human")] > 0.99

    def test_knn_k1_reproduces_training_labels(self):
        table = blob_table(n_per_class=30, separation=2.0)
        spec = AlgoSpec("weighted_knn", params={"k": 1})
        model = train_classifier(table, spec, "binary")
        _, labels = model.predict_batch(table.matrix())
        truth = ["Human"] * 30 + ["Synthetic"] * 30
        assert labels == truth

    def test_knn_exact_match_scores_one(self):
        table = blob_table(n_per_class=10)
        model = train_classifier(table, AlgoSpec("weighted_knn"), "binary")
        label, scores = predict(model, table.matrix()[0])
        assert label == "Human"
        assert scores.max() == 1.0

    def test_tree_threshold_split_at_depth_one(self):
        # 1-D threshold data: x < 0 -> class 0, x >= 0 -> class 1.
        x = np.linspace(-1, 1, 40).reshape(-1, 1)
        y = (x[:, 0] >= 0).astype(int)
        tree = DecisionTree(max_depth=16).fit(x, y, 2)
        assert not tree.root["leaf"]
        assert tree.root["left"]["leaf"] and tree.root["right"]["leaf"]
        assert -0.06 < tree.root["threshold"] < 0.01
        np.testing.assert_array_equal(tree.predict(x), y)

    def test_tree_split_matches_exhaustive_oracle(self, rng):
        # Oracle: try every midpoint on every feature, weighted Gini.
        x = rng.normal(size=(40, 3))
        y = rng.integers(0, 2, size=40)
        from voxstats.classical.models import _best_split, _gini

        best = None
        n = len(y)
        for f in range(3):
            for thr in np.unique(x[:, f]):
                left = x[:, f] < thr
                if not left.any() or left.all():
                    continue
                counts_l = np.bincount(y[left], minlength=2).astype(float)
                counts_r = np.bincount(y[~left], minlength=2).astype(float)
                score = (
                    left.sum() * _gini(counts_l, left.sum())
                    + (~left).sum() * _gini(counts_r, (~left).sum())
                ) / n
                if best is None or score < best - 1e-12:
                    best = score
        got = _best_split(x, y, np.ones(n), 2)
        assert got is not None
        assert abs(got[2] - best) < 1e-9

    def test_tree_leaves_predict_their_majority(self, rng):
        x = rng.normal(size=(120, 4))
        y = rng.integers(0, 3, size=120)
        tree = DecisionTree(max_depth=4).fit(x, y, 3)
        leaf_ids = tree.apply(x)
        pred = tree.predict(x)
        for leaf in np.unique(leaf_ids):
            members = y[leaf_ids == leaf]
            counts = np.bincount(members, minlength=3)
            assert (pred[leaf_ids == leaf] == counts.argmax()).all()

    def test_logistic_zero_weights_tie_breaks_low(self):
        table = blob_table(n_per_class=20)
        spec = AlgoSpec("logistic_regression", params={"epochs": 0})
        model = train_classifier(table, spec, "binary")
        label, scores = predict(model, np.full(14, 0.3))
        np.testing.assert_allclose(scores, [0.5, 0.5], atol=1e-12)
        assert label == model.classes[0]

    def test_lda_log_score_affine_in_x(self):
        table = blob_table(n_per_class=50, separation=3.0)
        model = train_classifier(table, AlgoSpec("lda"), "binary")
        x0 = np.full(14, 1.0)
        step = np.linspace(-0.3, 0.9, 14)
        points = np.stack([x0, x0 + step, x0 + 2 * step])
        scores = model.learner.decision_scores(points)
        diff = scores[:, 0] - scores[:, 1]
        assert abs((diff[2] - diff[1]) - (diff[1] - diff[0])) < 1e-9

    def test_qda_separable(self):
        table = blob_table(separation=8.0)
        model = train_classifier(table, AlgoSpec("qda"), "binary")
        _, labels = model.predict_batch(table.matrix())
        assert labels == ["Human"] * 100 + ["Synthetic"] * 100

    def test_bagged_single_tree_equals_tree(self):
        table = blob_table(n_per_class=40, separation=1.5, seed=3)
        bag_spec = AlgoSpec(
            "bagged_trees",
            params={"n_estimators": 1, "bootstrap": False, "max_depth": 6},
        )
        tree_spec = AlgoSpec("decision_tree", params={"max_depth": 6})
        bag = train_classifier(table, bag_spec, "binary")
        tree = train_classifier(table, tree_spec, "binary")
        probe = np.random.default_rng(9).normal(0.75, 1.0, size=(50, 14))
        _, bag_labels = bag.predict_batch(probe)
        _, tree_labels = tree.predict_batch(probe)
        assert bag_labels == tree_labels

    def test_rusboost_rounds_are_class_balanced(self):
        # Imbalanced classes: 60 vs 20 rows.
        rng = np.random.default_rng(4)
        matrix = np.vstack(
            [rng.normal(0, 1, (60, 14)), rng.normal(3, 1, (20, 14))]
        )
        table = FeatureTable(matrix, ["Human"] * 60 + ["SpikAI"] * 20)
        spec = AlgoSpec("rus_boosted_trees", params={"rounds": 10})
        model = train_classifier(table, spec, "binary")
        for counts in model.learner.round_class_counts:
            assert counts == [20, 20]

    def test_determinism(self):
        table = blob_table(n_per_class=30, separation=1.0, seed=5)
        spec = AlgoSpec("rus_boosted_trees", params={"rounds": 8}, seed=11)
        a = train_classifier(table, spec, "binary")
        b = train_classifier(table, spec, "binary")
        probe = np.random.default_rng(2).normal(0.5, 1.5, size=(40, 14))
        sa, la = a.predict_batch(probe)
        sb, lb = b.predict_batch(probe)
        np.testing.assert_array_equal(sa, sb)
        assert la == lb

    def test_single_class_rejected(self):
        matrix = np.random.default_rng(0).normal(size=(10, 14))
        table = FeatureTable(matrix, ["Human"] * 10)
        with pytest.raises(TrainError):
            train_classifier(table, AlgoSpec("gaussian_nb"), "binary")

    def test_nonfinite_features_rejected(self):
        matrix = np.zeros((4, 14))
        matrix[1, 3] = np.nan
        table = FeatureTable(matrix, ["Human", "Human", "SpikAI", "SpikAI"])
        with pytest.raises(TrainError):
            train_classifier(table, AlgoSpec("gaussian_nb"), "binary")

    def test_dimension_mismatch_rejected(self):
        model = train_classifier(blob_table(20), AlgoSpec("gaussian_nb"), "binary")
        with pytest.raises(PredictError):
            predict(model, np.zeros(5))

    def test_multi_scenario_keeps_engine_labels(self):
        rng = np.random.default_rng(1)
        matrix = np.vstack([rng.normal(4 * i, 0.5, (15, 14)) for i in range(4)])
        labels = (
            ["Human"] * 15 + ["NaturalReader"] * 15 + ["Replica"] * 15
            + ["SpikAI"] * 15
        )
        model = train_classifier(FeatureTable(matrix, labels),
                                 AlgoSpec("gaussian_nb"), "multi")
        assert model.classes == ("Human", "NaturalReader", "Replica", "SpikAI")
        _, pred = model.predict_batch(matrix)
        assert pred == labels


class TestKFold:
    def test_even_partition(self):
        folds = kfold_split(10, 5, seed=0)
        assert [len(f) for f in folds] == [2, 2, 2, 2, 2]
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(10))

    def test_uneven_sizes_balanced(self):
        folds = kfold_split(11, 5, seed=0)
        assert sorted(len(f) for f in folds) == [2, 2, 2, 2, 3]

    def test_seeded_determinism(self):
        a = kfold_split(50, 5, seed=42)
        b = kfold_split(50, 5, seed=42)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_too_many_folds(self):
        with pytest.raises(ConfigError):
            kfold_split(3, 5)

    def test_stratified_class_ratio(self):
        labels = ["a"] * 23 + ["b"] * 12
        folds = stratified_kfold(labels, 5, seed=1)
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(35))
        assert max(len(f) for f in folds) - min(len(f) for f in folds) <= 1
        labels_arr = np.array(labels)
        for cls in ("a", "b"):
            per_fold = [int((labels_arr[f] == cls).sum()) for f in folds]
            assert max(per_fold) - min(per_fold) <= 1

    def test_stratified_needs_k_per_class(self):
        with pytest.raises(ConfigError):
            stratified_kfold(["a"] * 10 + ["b"] * 3, 5, seed=0)


class TestCrossValidate:
    def test_separable_data_perfect_cv(self):
        table = blob_table(n_per_class=25, separation=8.0)
        spec = AlgoSpec("weighted_knn", params={"k": 1})
        report, cm = cross_validate(table, spec, "binary", k=5)
        assert report.accuracy == 1.0
        assert cm.total == 50

    def test_confusion_total_is_n(self):
        table = blob_table(n_per_class=17, separation=0.5)
        report, cm = cross_validate(table, AlgoSpec("gaussian_nb"), "binary", k=5)
        assert cm.total == 34

    def test_shuffled_labels_near_chance(self):
        accs = []
        for trial in range(20):
            rng = np.random.default_rng(trial)
            matrix = rng.normal(size=(100, 14))
            labels = ["Human"] * 50 + ["SpikAI"] * 50
            table = FeatureTable(matrix, labels)
            spec = AlgoSpec("gaussian_nb", seed=trial)
            report, _ = cross_validate(table, spec, "binary", k=5)
            accs.append(report.accuracy)
        assert abs(np.mean(accs) - 0.5) < 0.1

    def test_infeasible_stratification(self):
        table = blob_table(n_per_class=3)
        with pytest.raises(ConfigError):
            cross_validate(table, AlgoSpec("gaussian_nb"), "binary", k=5)


class TestPersistence:
    @pytest.mark.parametrize("kind", [
        "decision_tree", "lda", "qda", "gaussian_nb", "logistic_regression",
        "weighted_knn", "bagged_trees", "rus_boosted_trees",
    ])
    def test_roundtrip_prediction_identical(self, kind, tmp_path):
        params = {}
        if kind == "logistic_regression":
            params = {"epochs": 50}
        if kind in ("bagged_trees", "rus_boosted_trees"):
            params = {"n_estimators": 5} if kind == "bagged_trees" else {"rounds": 5}
        table = blob_table(n_per_class=25, separation=2.0, seed=8)
        model = train_classifier(table, AlgoSpec(kind, params=params, seed=3),
                                 "binary", config_hash="cafe")
        path = tmp_path / f"{kind}.model.json"
        save_model(model, path)
        again = load_model(path)
        probe = np.random.default_rng(6).normal(1.0, 2.0, size=(30, 14))
        s1, l1 = model.predict_batch(probe)
        s2, l2 = again.predict_batch(probe)
        np.testing.assert_array_equal(s1, s2)
        assert l1 == l2
        assert again.config_hash == "cafe"
        assert again.feature_subset == model.feature_subset
