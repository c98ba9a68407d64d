"""Pipeline configuration and the config hash embedded in every artifact.

The feature geometry (frame sizes, mel bands, bispectral grid) determines the
meaning of every extracted number, so its hash travels with feature tables,
models and reports.  A model refuses to consume features produced under a
different hash.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class FeatureConfig:
    """Geometry of the feature extraction pipeline.

    Frame sizes are in milliseconds so that clips of different sample rates
    stay comparable; they are converted to samples per clip.
    """

    frame_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hann"
    n_mels: int = 26
    n_coeffs: int = 13
    f_min: float = 0.0
    f_max: float | None = None  # None means Nyquist at decode time
    k_segments: int = 100
    grid_size: int = 64
    image_height: int = 32
    image_width: int = 32
    min_clip_s: float = 4.0
    max_clip_s: float = 5.0

    def __post_init__(self):
        if self.frame_ms <= 0 or self.hop_ms <= 0:
            raise ConfigError("frame_ms and hop_ms must be positive")
        if self.n_mels < 1 or self.n_coeffs < 1:
            raise ConfigError("n_mels and n_coeffs must be at least 1")
        if self.n_coeffs > self.n_mels:
            raise ConfigError("n_coeffs cannot exceed n_mels")
        if self.k_segments < 1 or self.grid_size < 1:
            raise ConfigError("k_segments and grid_size must be at least 1")
        if self.min_clip_s > self.max_clip_s:
            raise ConfigError("min_clip_s cannot exceed max_clip_s")

    def frame_samples(self, sample_rate):
        return max(1, int(round(self.frame_ms * sample_rate / 1000.0)))

    def hop_samples(self, sample_rate):
        return max(1, int(round(self.hop_ms * sample_rate / 1000.0)))

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown feature config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class CrnnConfig:
    """Architecture and optimizer settings for the conv-recurrent detector."""

    conv3_channels: int = 128
    lstm_hidden: tuple = (64, 64)
    dense_units: int = 64
    dropout: tuple = (0.25, 0.5)
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    split: tuple = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError("split fractions must be three values summing to 1")
        if not all(f > 0 for f in self.split):
            raise ConfigError("split fractions must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        for rate in self.dropout:
            if not 0.0 <= rate < 1.0:
                raise ConfigError("dropout rates must lie in [0, 1)")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["lstm_hidden"] = list(self.lstm_hidden)
        d["dropout"] = list(self.dropout)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown crnn config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("lstm_hidden", "dropout", "split"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def canonical_json(data):
    """Deterministic JSON used for hashing and embedding."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    """Short stable digest of a FeatureConfig (or plain dict)."""
    data = cfg.to_dict() if hasattr(cfg, "to_dict") else cfg
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()[:16]


def load_pipeline_config(path):
    """Read a run config JSON file.

    Recognized sections: "features", "crnn", "algo" (hyperparameter
    overrides for classical models).  Missing sections fall back to
    defaults; unknown sections are rejected.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    unknown = set(raw) - {"features", "crnn", "algo"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    features = FeatureConfig.from_dict(raw.get("features", {}))
    crnn = CrnnConfig.from_dict(raw.get("crnn", {}))
    algo = raw.get("algo", {})
    if not isinstance(algo, dict):
        raise ConfigError("'algo' section must be an object")
    return features, crnn, algo
