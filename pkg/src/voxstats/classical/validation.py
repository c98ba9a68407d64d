"""K-fold cross-validation with stratified folds."""

import numpy as np

from ..errors import ConfigError
from .metrics import ConfusionMatrix, metrics


def kfold_split(n, k=5, seed=0):
    """Seeded shuffle of range(n) partitioned into k folds.

    Fold sizes differ by at most one; the first n % k folds take the extra
    sample.
    """
    if k < 1:
        raise ConfigError("need at least one fold")
    if k > n:
        raise ConfigError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [fold.copy() for fold in np.array_split(perm, k)]


def stratified_kfold(labels, k=5, seed=0):
    """Folds that keep per-class counts within one sample of each other.

    Classes are processed in sorted order; each class's extra samples go to
    the currently least-loaded folds, so overall fold sizes also differ by
    at most one.
    """
    labels = list(labels)
    n = len(labels)
    if k > n:
        raise ConfigError(f"cannot split {n} samples into {k} folds")
    classes = sorted(set(labels))
    rng = np.random.default_rng(seed)
    by_class = {c: np.flatnonzero(np.asarray(labels, dtype=object) == c) for c in classes}
    for c, idx in by_class.items():
        if len(idx) < k:
            raise ConfigError(
                f"class {c!r} has {len(idx)} samples, fewer than {k} folds"
            )
    folds = [[] for _ in range(k)]
    loads = np.zeros(k, dtype=int)
    for c in classes:
        idx = by_class[c][rng.permutation(len(by_class[c]))]
        base, extra = divmod(len(idx), k)
        order = np.argsort(loads, kind="stable")  # least-loaded folds first
        pos = 0
        for rank, fold_id in enumerate(order):
            take = base + (1 if rank < extra else 0)
            folds[fold_id].extend(idx[pos : pos + take])
            loads[fold_id] += take
            pos += take
    return [np.array(sorted(f), dtype=int) for f in folds]


def cross_validate(table, spec, scenario, k=5):
    """Stratified k-fold CV; returns (MetricsReport, aggregate ConfusionMatrix).

    The confusion matrix is accumulated over held-out folds and the metrics
    are computed from that aggregate.  Fold assignment and per-fold model
    seeds derive from spec.seed, so results are reproducible.
    """
    from .models import project_labels, train_on_arrays

    x = table.matrix()
    y = project_labels(table.labels, scenario)
    classes = sorted(set(y))
    if len(classes) < 2:
        raise ConfigError("cross-validation needs at least two classes")
    folds = stratified_kfold(y, k=k, seed=spec.seed)
    y_arr = np.asarray(y, dtype=object)
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    index = {c: i for i, c in enumerate(classes)}
    for fold_id, held_out in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[held_out] = False
        train_idx = np.flatnonzero(mask)
        fold_spec = spec.with_seed(spec.seed + 1000 * (fold_id + 1))
        model = train_on_arrays(
            x[train_idx], y_arr[train_idx], fold_spec, classes,
            feature_subset=table.subset,
        )
        _, pred = model.predict_batch(x[held_out])
        for t, p in zip(y_arr[held_out], pred):
            counts[index[t], index[p]] += 1
    cm = ConfusionMatrix(counts, tuple(classes))
    positive = "Synthetic" if scenario == "binary" and "Synthetic" in classes else None
    return metrics(cm, positive_class=positive), cm
