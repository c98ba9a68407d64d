"""The eight classical classifiers, trained on feature tables.

Every learner works on a dense float matrix with integer-encoded classes
and returns per-class scores that sum to 1; argmax with numpy's
first-occurrence rule breaks ties toward the lowest class index.  All
stochastic training is driven by explicit seeds so identical inputs give
identical models.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ..audio_io import LABELS_BY_NAME
from ..errors import ConfigError, PredictError, TrainError

ALGO_KINDS = (
    "decision_tree",
    "lda",
    "qda",
    "gaussian_nb",
    "logistic_regression",
    "weighted_knn",
    "bagged_trees",
    "rus_boosted_trees",
)

_DEFAULT_PARAMS = {
    "decision_tree": {"max_depth": 16, "min_leaf": 1},
    "lda": {"shrinkage": 1e-6},
    "qda": {"shrinkage": 1e-6},
    "gaussian_nb": {"var_floor": 1e-9},
    "logistic_regression": {"learning_rate": 0.1, "epochs": 500, "l2": 1e-4},
    "weighted_knn": {"k": 10},
    "bagged_trees": {"n_estimators": 50, "bootstrap": True, "max_depth": 16,
                     "min_leaf": 1},
    "rus_boosted_trees": {"rounds": 50, "max_depth": 4, "min_leaf": 1},
}


@dataclass(frozen=True)
class AlgoSpec:
    """Classifier choice plus hyperparameters and an explicit seed."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise ConfigError(f"unknown algorithm {self.kind!r}")
        merged = dict(_DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigError(
                f"unknown {self.kind} hyperparameters: {sorted(unknown)}"
            )
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    def with_seed(self, seed):
        return replace(self, seed=seed)


def project_labels(labels, scenario):
    """Map manifest labels onto the scenario's class space."""
    if scenario == "binary":
        out = []
        for lab in labels:
            if lab in LABELS_BY_NAME:
                out.append(LABELS_BY_NAME[lab].binary())
            elif lab in ("Human", "Synthetic"):
                out.append(lab)
            else:
                raise TrainError(f"label {lab!r} has no binary projection")
        return out
    if scenario == "multi":
        return list(labels)
    raise ConfigError(f"unknown scenario {scenario!r}")


# ---------------------------------------------------------------------------
# Decision tree (CART, Gini impurity, exhaustive threshold search)
# ---------------------------------------------------------------------------


def _gini(counts, total):
    if total == 0.0:
        return 0.0
    p = counts / total
    return 1.0 - np.sum(p * p)


def _best_split(x, y, weights, n_classes):
    """Exhaustive search over (feature, midpoint threshold) pairs.

    Returns (feature, threshold, score) or None; ties keep the first
    feature and the first threshold encountered, so results are
    deterministic for a fixed row order.
    """
    n, d = x.shape
    total_counts = np.zeros(n_classes)
    np.add.at(total_counts, y, weights)
    total = total_counts.sum()
    parent = _gini(total_counts, total)
    best = None
    best_score = parent - 1e-12  # require a strict improvement
    for feature in range(d):
        order = np.argsort(x[:, feature], kind="stable")
        xs = x[order, feature]
        ys = y[order]
        ws = weights[order]
        # prefix[i, c] = weight of class c among the first i rows
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = ws
        prefix = np.cumsum(onehot, axis=0)
        wleft = np.cumsum(ws)
        cut = np.flatnonzero(xs[1:] > xs[:-1])  # split between distinct values
        if cut.size == 0:
            continue
        left_counts = prefix[cut]
        left_w = wleft[cut]
        right_counts = total_counts - left_counts
        right_w = total - left_w
        pl = left_counts / left_w[:, None]
        pr = right_counts / np.maximum(right_w, 1e-300)[:, None]
        gini_l = 1.0 - np.sum(pl * pl, axis=1)
        gini_r = 1.0 - np.sum(pr * pr, axis=1)
        score = (left_w * gini_l + right_w * gini_r) / total
        j = int(np.argmin(score))
        if score[j] < best_score:
            best_score = float(score[j])
            threshold = 0.5 * (xs[cut[j]] + xs[cut[j] + 1])
            best = (feature, float(threshold), best_score)
    return best


class DecisionTree:
    """CART classifier; rows with feature < threshold go left."""

    def __init__(self, max_depth=16, min_leaf=1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root = None
        self.n_classes = 0

    def fit(self, x, y, n_classes, weights=None):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        if weights is None:
            weights = np.ones(len(y))
        self.n_classes = n_classes
        self._next_leaf = 0
        self.root = self._grow(x, y, np.asarray(weights, dtype=np.float64), 0)
        return self

    def _leaf(self, y, weights):
        counts = np.zeros(self.n_classes)
        np.add.at(counts, y, weights)
        node = {
            "leaf": True,
            "klass": int(np.argmax(counts)),  # ties -> lowest class index
            "counts": counts.tolist(),
            "leaf_id": self._next_leaf,
        }
        self._next_leaf += 1
        return node

    def _grow(self, x, y, weights, depth):
        if (
            depth >= self.max_depth
            or len(y) <= self.min_leaf
            or np.unique(y).size == 1
        ):
            return self._leaf(y, weights)
        split = _best_split(x, y, weights, self.n_classes)
        if split is None:
            return self._leaf(y, weights)
        feature, threshold, _ = split
        left = x[:, feature] < threshold
        if left.sum() < self.min_leaf or (~left).sum() < self.min_leaf:
            return self._leaf(y, weights)
        return {
            "leaf": False,
            "feature": feature,
            "threshold": threshold,
            "left": self._grow(x[left], y[left], weights[left], depth + 1),
            "right": self._grow(x[~left], y[~left], weights[~left], depth + 1),
        }

    def _route(self, row):
        node = self.root
        while not node["leaf"]:
            node = node["left"] if row[node["feature"]] < node["threshold"] else node["right"]
        return node

    def predict(self, x):
        return np.array([self._route(row)["klass"] for row in np.atleast_2d(x)])

    def apply(self, x):
        """Leaf ids, for auditing which training rows share a leaf."""
        return np.array([self._route(row)["leaf_id"] for row in np.atleast_2d(x)])

    def predict_scores(self, x):
        scores = np.zeros((len(x), self.n_classes))
        for i, row in enumerate(np.atleast_2d(x)):
            counts = np.asarray(self._route(row)["counts"])
            total = counts.sum()
            scores[i] = counts / total if total else np.full(self.n_classes, 1.0 / self.n_classes)
        return scores

    def to_payload(self):
        return {"max_depth": self.max_depth, "min_leaf": self.min_leaf,
                "n_classes": self.n_classes, "root": self.root}

    @classmethod
    def from_payload(cls, payload):
        tree = cls(payload["max_depth"], payload["min_leaf"])
        tree.n_classes = payload["n_classes"]
        tree.root = payload["root"]
        return tree


# ---------------------------------------------------------------------------
# Gaussian discriminants and naive Bayes
# ---------------------------------------------------------------------------


def _log_softmax_scores(log_scores):
    shifted = log_scores - log_scores.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


class _GaussianDiscriminant:
    """Shared machinery for LDA (pooled) and QDA (per-class) covariance."""

    pooled = True

    def __init__(self, shrinkage=1e-6):
        self.shrinkage = shrinkage

    def fit(self, x, y, n_classes):
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[1]
        self.n_classes = n_classes
        self.means = np.zeros((n_classes, d))
        self.log_priors = np.zeros(n_classes)
        covs = []
        for c in range(n_classes):
            xc = x[y == c]
            self.means[c] = xc.mean(axis=0)
            self.log_priors[c] = np.log(len(xc) / len(x))
            centered = xc - self.means[c]
            covs.append(centered.T @ centered)
        if self.pooled:
            cov = sum(covs) / len(x)
            self.precisions = [self._invert(cov, d)] * n_classes
            self.log_dets = [self._logdet(cov, d)] * n_classes
        else:
            self.precisions = []
            self.log_dets = []
            for c in range(n_classes):
                cov = covs[c] / max((y == c).sum(), 1)
                self.precisions.append(self._invert(cov, d))
                self.log_dets.append(self._logdet(cov, d))
        return self

    def _regularized(self, cov, d):
        # Diagonal shrinkage keeps degenerate covariances invertible.
        lam = max(self.shrinkage * np.trace(cov) / d, 1e-12)
        return cov + lam * np.eye(d)

    def _invert(self, cov, d):
        return np.linalg.inv(self._regularized(cov, d))

    def _logdet(self, cov, d):
        sign, logdet = np.linalg.slogdet(self._regularized(cov, d))
        return logdet if sign > 0 else 0.0

    def decision_scores(self, x):
        """Unnormalized class log-posteriors (linear in x for pooled covariance)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        scores = np.zeros((len(x), self.n_classes))
        for c in range(self.n_classes):
            diff = x - self.means[c]
            quad = np.einsum("ni,ij,nj->n", diff, self.precisions[c], diff)
            scores[:, c] = -0.5 * quad - 0.5 * self.log_dets[c] + self.log_priors[c]
        return scores

    def predict_scores(self, x):
        return _log_softmax_scores(self.decision_scores(x))

    def to_payload(self):
        return {
            "shrinkage": self.shrinkage,
            "n_classes": self.n_classes,
            "means": self.means.tolist(),
            "log_priors": self.log_priors.tolist(),
            "precisions": [p.tolist() for p in self.precisions],
            "log_dets": [float(v) for v in self.log_dets],
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["shrinkage"])
        model.n_classes = payload["n_classes"]
        model.means = np.array(payload["means"])
        model.log_priors = np.array(payload["log_priors"])
        model.precisions = [np.array(p) for p in payload["precisions"]]
        model.log_dets = payload["log_dets"]
        return model


class LDA(_GaussianDiscriminant):
    pooled = True


class QDA(_GaussianDiscriminant):
    pooled = False


class GaussianNB:
    def __init__(self, var_floor=1e-9):
        self.var_floor = var_floor

    def fit(self, x, y, n_classes):
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[1]
        self.n_classes = n_classes
        self.means = np.zeros((n_classes, d))
        self.variances = np.zeros((n_classes, d))
        self.log_priors = np.zeros(n_classes)
        for c in range(n_classes):
            xc = x[y == c]
            self.means[c] = xc.mean(axis=0)
            self.variances[c] = np.maximum(xc.var(axis=0), self.var_floor)
            self.log_priors[c] = np.log(len(xc) / len(x))
        return self

    def decision_scores(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        scores = np.zeros((len(x), self.n_classes))
        for c in range(self.n_classes):
            ll = -0.5 * (
                np.log(2 * np.pi * self.variances[c])
                + (x - self.means[c]) ** 2 / self.variances[c]
            ).sum(axis=1)
            scores[:, c] = ll + self.log_priors[c]
        return scores

    def predict_scores(self, x):
        return _log_softmax_scores(self.decision_scores(x))

    def to_payload(self):
        return {
            "var_floor": self.var_floor,
            "n_classes": self.n_classes,
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "log_priors": self.log_priors.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["var_floor"])
        model.n_classes = payload["n_classes"]
        model.means = np.array(payload["means"])
        model.variances = np.array(payload["variances"])
        model.log_priors = np.array(payload["log_priors"])
        return model


# ---------------------------------------------------------------------------
# Logistic regression (multinomial, batch gradient descent)
# ---------------------------------------------------------------------------


class LogisticRegression:
    """Softmax regression with internal feature standardization."""

    def __init__(self, learning_rate=0.1, epochs=500, l2=1e-4):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2

    def fit(self, x, y, n_classes):
        x = np.asarray(x, dtype=np.float64)
        n, d = x.shape
        self.n_classes = n_classes
        self.mu = x.mean(axis=0)
        sigma = x.std(axis=0)
        self.sigma = np.where(sigma > 0, sigma, 1.0)
        xs = (x - self.mu) / self.sigma
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y] = 1.0
        self.w = np.zeros((d, n_classes))
        self.b = np.zeros(n_classes)
        for _ in range(self.epochs):
            probs = _log_softmax_scores(xs @ self.w + self.b)
            grad = xs.T @ (probs - onehot) / n + self.l2 * self.w
            grad_b = (probs - onehot).mean(axis=0)
            self.w -= self.learning_rate * grad
            self.b -= self.learning_rate * grad_b
        return self

    def predict_scores(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        xs = (x - self.mu) / self.sigma
        return _log_softmax_scores(xs @ self.w + self.b)

    def to_payload(self):
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "n_classes": self.n_classes,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "w": self.w.tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["learning_rate"], payload["epochs"], payload["l2"])
        model.n_classes = payload["n_classes"]
        model.mu = np.array(payload["mu"])
        model.sigma = np.array(payload["sigma"])
        model.w = np.array(payload["w"])
        model.b = np.array(payload["b"])
        return model


# ---------------------------------------------------------------------------
# Weighted k-nearest neighbors
# ---------------------------------------------------------------------------


class WeightedKNN:
    """Euclidean KNN with inverse-distance weights.

    An exact feature match (distance zero) dominates: scores then come from
    the zero-distance neighbors alone.
    """

    def __init__(self, k=10):
        self.k = k

    def fit(self, x, y, n_classes):
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=int)
        self.n_classes = n_classes
        return self

    def predict_scores(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        k = min(self.k, len(self.y))
        scores = np.zeros((len(x), self.n_classes))
        for i, row in enumerate(x):
            dist = np.sqrt(((self.x - row) ** 2).sum(axis=1))
            exact = np.flatnonzero(dist == 0.0)
            if exact.size:
                np.add.at(scores[i], self.y[exact], 1.0)
            else:
                nearest = np.argsort(dist, kind="stable")[:k]
                np.add.at(scores[i], self.y[nearest], 1.0 / dist[nearest])
            scores[i] /= scores[i].sum()
        return scores

    def to_payload(self):
        return {
            "k": self.k,
            "n_classes": self.n_classes,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["k"])
        model.n_classes = payload["n_classes"]
        model.x = np.array(payload["x"])
        model.y = np.array(payload["y"], dtype=int)
        return model


# ---------------------------------------------------------------------------
# Tree ensembles
# ---------------------------------------------------------------------------


class BaggedTrees:
    """Bootstrap-aggregated CART trees with majority vote.

    With one estimator and bootstrap disabled this is exactly a single
    tree.  Member RNG streams derive from (seed, member index), so results
    do not depend on training order.
    """

    def __init__(self, n_estimators=50, bootstrap=True, max_depth=16,
                 min_leaf=1, seed=0):
        self.n_estimators = n_estimators
        self.bootstrap = bootstrap
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, x, y, n_classes):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        n = len(y)
        self.n_classes = n_classes
        self.trees = []
        for member in range(self.n_estimators):
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, member]))
            idx = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = DecisionTree(self.max_depth, self.min_leaf)
            tree.fit(x[idx], y[idx], n_classes)
            self.trees.append(tree)
        return self

    def predict_scores(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        votes = np.zeros((len(x), self.n_classes))
        for tree in self.trees:
            pred = tree.predict(x)
            votes[np.arange(len(x)), pred] += 1.0
        return votes / votes.sum(axis=1, keepdims=True)

    def to_payload(self):
        return {
            "n_estimators": self.n_estimators,
            "bootstrap": self.bootstrap,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "trees": [t.to_payload() for t in self.trees],
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["n_estimators"], payload["bootstrap"],
                    payload["max_depth"], payload["min_leaf"], payload["seed"])
        model.n_classes = payload["n_classes"]
        model.trees = [DecisionTree.from_payload(p) for p in payload["trees"]]
        return model


class RUSBoostedTrees:
    """Boosting over shallow trees with per-round random undersampling.

    Each round draws a class-balanced sample (every class undersampled to
    the minority count, selection probability proportional to the current
    boosting weights), fits a depth-limited tree on it, then applies the
    multi-class AdaBoost weight update on the full training set.
    """

    def __init__(self, rounds=50, max_depth=4, min_leaf=1, seed=0):
        self.rounds = rounds
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, x, y, n_classes):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        n = len(y)
        self.n_classes = n_classes
        class_idx = [np.flatnonzero(y == c) for c in range(n_classes)]
        n_min = min(len(idx) for idx in class_idx)
        weights = np.full(n, 1.0 / n)
        self.trees = []
        self.alphas = []
        self.round_class_counts = []
        for rnd in range(self.rounds):
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, rnd]))
            sample = []
            for idx in class_idx:
                p = weights[idx] + 1e-12
                p = p / p.sum()
                chosen = rng.choice(idx, size=n_min, replace=False, p=p)
                sample.append(np.sort(chosen))
            sample = np.concatenate(sample)
            counts = [int((y[sample] == c).sum()) for c in range(n_classes)]
            tree = DecisionTree(self.max_depth, self.min_leaf)
            tree.fit(x[sample], y[sample], n_classes)
            pred = tree.predict(x)
            miss = pred != y
            err = float(np.clip(weights[miss].sum(), 1e-10, 1 - 1e-10))
            alpha = np.log((1 - err) / err) + np.log(n_classes - 1)
            if alpha <= 0:
                alpha = 0.0  # round contributes nothing but stays recorded
            weights = weights * np.exp(alpha * miss)
            weights /= weights.sum()
            self.trees.append(tree)
            self.alphas.append(float(alpha))
            self.round_class_counts.append(counts)
        return self

    def predict_scores(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        scores = np.zeros((len(x), self.n_classes))
        for tree, alpha in zip(self.trees, self.alphas):
            pred = tree.predict(x)
            scores[np.arange(len(x)), pred] += alpha
        totals = scores.sum(axis=1, keepdims=True)
        uniform = np.full_like(scores, 1.0 / self.n_classes)
        return np.where(totals > 0, scores / np.maximum(totals, 1e-300), uniform)

    def to_payload(self):
        return {
            "rounds": self.rounds,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "alphas": self.alphas,
            "round_class_counts": self.round_class_counts,
            "trees": [t.to_payload() for t in self.trees],
        }

    @classmethod
    def from_payload(cls, payload):
        model = cls(payload["rounds"], payload["max_depth"], payload["min_leaf"],
                    payload["seed"])
        model.n_classes = payload["n_classes"]
        model.alphas = payload["alphas"]
        model.round_class_counts = payload["round_class_counts"]
        model.trees = [DecisionTree.from_payload(p) for p in payload["trees"]]
        return model


# ---------------------------------------------------------------------------
# Top-level model wrapper
# ---------------------------------------------------------------------------

_LEARNERS = {
    "decision_tree": DecisionTree,
    "lda": LDA,
    "qda": QDA,
    "gaussian_nb": GaussianNB,
    "logistic_regression": LogisticRegression,
    "weighted_knn": WeightedKNN,
    "bagged_trees": BaggedTrees,
    "rus_boosted_trees": RUSBoostedTrees,
}

_SEEDED = {"bagged_trees", "rus_boosted_trees"}


@dataclass
class ClassifierModel:
    """A trained learner plus the metadata needed to use it safely."""

    kind: str
    classes: tuple
    feature_subset: str
    n_features: int
    learner: object
    seed: int = 0
    config_hash: str | None = None
    feature_config: dict | None = None

    def predict_batch(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise PredictError(
                f"model expects {self.n_features} features, got {x.shape[1]}"
            )
        scores = self.learner.predict_scores(x)
        labels = [self.classes[i] for i in scores.argmax(axis=1)]
        return scores, labels


def _make_learner(spec):
    params = dict(spec.params)
    if spec.kind in _SEEDED:
        params["seed"] = spec.seed
    return _LEARNERS[spec.kind](**params)


def train_on_arrays(x, labels, spec, classes, feature_subset="all",
                    config_hash=None, feature_config=None):
    """Fit a learner on an already-encoded matrix; shared by CV and training."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise TrainError("feature matrix contains non-finite values")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[lab] for lab in labels], dtype=int)
    if np.unique(y).size < 2:
        raise TrainError("training data contains a single class")
    learner = _make_learner(spec).fit(x, y, len(classes))
    return ClassifierModel(
        kind=spec.kind,
        classes=tuple(classes),
        feature_subset=feature_subset,
        n_features=x.shape[1],
        learner=learner,
        seed=spec.seed,
        config_hash=config_hash,
        feature_config=feature_config,
    )


def train_classifier(table, spec, scenario, config_hash=None,
                     feature_config=None):
    """Train on a feature table under the binary or multi-class scenario."""
    labels = project_labels(table.labels, scenario)
    classes = sorted(set(labels))
    return train_on_arrays(
        table.matrix(), labels, spec, classes,
        feature_subset=table.subset, config_hash=config_hash,
        feature_config=feature_config,
    )


def predict(model, fv):
    """Classify one feature vector; returns (label, per-class scores)."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.ndim != 1:
        raise PredictError("predict expects a single 1-D feature vector")
    scores, labels = model.predict_batch(fv[None, :])
    return labels[0], scores[0]
