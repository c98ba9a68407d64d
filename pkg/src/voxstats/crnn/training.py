"""Adam training loop, stratified splits, history and clip classification."""

import csv

import numpy as np

from ..config import FeatureConfig
from ..errors import ConfigError
from ..spectral import mel_spectrogram, spectrogram_image
from . import network as N


class Adam:
    """Standard Adam with bias correction, one slot per parameter tensor."""

    def __init__(self, net, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.net = net
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {
            (idx, name): np.zeros_like(value)
            for idx, name, value in net.parameters()
        }
        self.v = {key: np.zeros_like(val) for key, val in self.m.items()}

    def step(self, grads):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for idx, name, value in self.net.parameters():
            g = grads[idx].get(name)
            if g is None:
                continue
            key = (idx, name)
            self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * g * g
            update = (self.m[key] / b1c) / (np.sqrt(self.v[key] / b2c) + self.eps)
            value -= self.lr * update


def stratified_split(labels, fractions, seed):
    """Per-class shuffled split into train/val/test index arrays.

    Every class must land at least one sample in each split, otherwise
    ConfigError.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    train_idx, val_idx, test_idx = [], [], []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        n_train = int(round(fractions[0] * n))
        n_val = int(round(fractions[1] * n))
        n_train = min(n_train, n - 2)
        n_val = min(n_val, n - n_train - 1)
        if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
            raise ConfigError(
                f"class {c!r} has {n} samples, too few for a three-way split"
            )
        train_idx.extend(idx[:n_train])
        val_idx.extend(idx[n_train : n_train + n_val])
        test_idx.extend(idx[n_train + n_val :])
    return (
        np.array(sorted(train_idx)),
        np.array(sorted(val_idx)),
        np.array(sorted(test_idx)),
    )


def evaluate(net, images, labels):
    """Eval-mode mean loss and accuracy over a full array of images."""
    logits, _ = N.forward(net, images, mode="eval")
    loss = N.cross_entropy(logits, labels)
    acc = float((logits.argmax(axis=1) == np.asarray(labels)).mean())
    return loss, acc


def train(net, images, labels, cfg, seed=None):
    """Train in place; returns (net, history, splits).

    history is one row per epoch with eval-mode train/val loss and
    accuracy.  All randomness (split, shuffling, dropout masks) derives
    from the seed, so a rerun reproduces the final parameters exactly.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    seed = net.seed if seed is None else seed
    train_idx, val_idx, test_idx = stratified_split(labels, cfg.split, seed)
    x_train, y_train = images[train_idx], labels[train_idx]
    x_val, y_val = images[val_idx], labels[val_idx]

    optimizer = Adam(net, learning_rate=cfg.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(y_train))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            step += 1
            drop_seed = np.random.SeedSequence([seed, 2, step])
            _, caches = N.forward(
                net, x_train[batch], mode="train",
                dropout_seed=np.random.default_rng(drop_seed),
            )
            grads = N.backward(net, caches, y_train[batch])
            optimizer.step(grads)
        train_loss, train_acc = evaluate(net, x_train, y_train)
        val_loss, val_acc = evaluate(net, x_val, y_val)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "train_acc": train_acc,
                "val_loss": val_loss,
                "val_acc": val_acc,
            }
        )
    splits = {"train": train_idx, "val": val_idx, "test": test_idx}
    return net, history, splits


def history_to_csv(history, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]
        )
        writer.writeheader()
        writer.writerows(history)


def clip_image(clip, cfg):
    """Feature image for one clip: log mel spectrogram resized to 32x32x1."""
    return spectrogram_image(
        mel_spectrogram(clip, cfg), cfg.image_height, cfg.image_width
    )


def classify(net, clip, cfg=None):
    """Full pipeline for one clip; returns (class name, score array)."""
    if cfg is None:
        cfg = (
            FeatureConfig.from_dict(net.feature_config)
            if net.feature_config
            else FeatureConfig()
        )
    image = clip_image(clip, cfg)
    scores = N.predict_scores(net, image[None, ...])[0]
    return net.classes[int(scores.argmax())], scores
