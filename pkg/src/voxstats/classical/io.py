"""Classical model persistence: versioned, self-describing JSON.

JSON serializes floats via repr, which round-trips exactly, so a reloaded
model is prediction-identical to the one saved.
"""

import json

from ..errors import ConfigError
from .models import _LEARNERS, ClassifierModel

FORMAT_NAME = "voxstats-classical"
FORMAT_VERSION = 1


def save_model(model, path):
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "classes": list(model.classes),
        "feature_subset": model.feature_subset,
        "n_features": model.n_features,
        "seed": model.seed,
        "config_hash": model.config_hash,
        "feature_config": model.feature_config,
        "params": model.learner.to_payload(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != FORMAT_NAME:
        raise ConfigError(f"{path} is not a classical model file")
    if payload.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported model version {payload.get('version')}")
    learner = _LEARNERS[payload["kind"]].from_payload(payload["params"])
    return ClassifierModel(
        kind=payload["kind"],
        classes=tuple(payload["classes"]),
        feature_subset=payload["feature_subset"],
        n_features=payload["n_features"],
        learner=learner,
        seed=payload["seed"],
        config_hash=payload.get("config_hash"),
        feature_config=payload.get("feature_config"),
    )
