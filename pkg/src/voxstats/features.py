"""Statistical feature vectors and feature tables.

Each admitted clip becomes 14 numbers plus a label: the four moments of the
normalized bicoherence magnitude and phase grids (8), and mean/variance of
the MFCC, delta and delta-square matrices taken over all cells (6).
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import bispectral, cepstral
from .audio_io import ClassLabel
from .errors import ConfigError, EmptyResult, FeatureError

FEATURE_COLUMNS = (
    "bm_mean", "bm_var", "bm_skew", "bm_kurt",
    "bp_mean", "bp_var", "bp_skew", "bp_kurt",
    "mfcc_mean", "mfcc_var",
    "d_mean", "d_var",
    "d2_mean", "d2_var",
)

SUBSET_COLUMNS = {
    "bico_mag": (0, 1, 2, 3),
    "bico_phase": (4, 5, 6, 7),
    "mfcc": (8, 9),
    "delta": (10, 11),
    "delta2": (12, 13),
    "bico_all": (0, 1, 2, 3, 4, 5, 6, 7),
    "cepstral_all": (8, 9, 10, 11, 12, 13),
    "all": tuple(range(14)),
}


@dataclass(frozen=True)
class Moments:
    """First four population moments: mean, variance, skewness, kurtosis."""

    mean: float
    variance: float
    skewness: float
    kurtosis: float

    def as_tuple(self):
        return (self.mean, self.variance, self.skewness, self.kurtosis)


def moments(values):
    """Population moments with expectations taken as plain averages.

    When the variance is zero the standardized moments are undefined; both
    skewness and kurtosis are reported as 0 in that degenerate case.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 1:
        raise ValueError("moments require at least one value")
    if (x == x[0]).all():  # constant input: variance is exactly 0
        return Moments(float(x[0]), 0.0, 0.0, 0.0)
    mean = x.mean()
    centered = x - mean
    variance = np.mean(centered**2)
    if variance == 0.0:
        return Moments(float(mean), 0.0, 0.0, 0.0)
    z = centered / np.sqrt(variance)
    return Moments(
        float(mean), float(variance), float(np.mean(z**3)), float(np.mean(z**4))
    )


def _mean_var(matrix):
    """Scalar summary of a frames x coefficients matrix.

    Mean is the grand mean over all cells.  Variance is the population
    variance along the frame axis, averaged over coefficients, so a signal
    whose frames are all identical reports zero variance.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if (m == m[0]).all():  # exactly repeated frames, variance is exactly 0
        return float(m[0].mean()), 0.0
    return float(m.mean()), float(np.mean(np.var(m, axis=0)))


@dataclass(frozen=True)
class FeatureVector:
    """The 15-D record: 14 numeric entries plus the class label."""

    bico_mag: Moments
    bico_phase: Moments
    mfcc_stats: tuple
    delta_stats: tuple
    delta2_stats: tuple
    label: ClassLabel

    def values(self):
        out = np.array(
            self.bico_mag.as_tuple()
            + self.bico_phase.as_tuple()
            + tuple(self.mfcc_stats)
            + tuple(self.delta_stats)
            + tuple(self.delta2_stats)
        )
        assert out.shape == (14,)
        return out


def extract_feature_vector(clip, label, cfg):
    """Compute the labeled feature vector for one mono clip.

    Raises FeatureError when the clip is too short for either the
    bispectral segmentation or a single analysis frame.
    """
    if clip.channels != 1:
        raise FeatureError("feature extraction requires a mono clip")
    n = clip.samples.shape[0]
    if n < cfg.k_segments:
        raise FeatureError(
            f"clip of {n} samples cannot make {cfg.k_segments} segments"
        )
    if n // cfg.k_segments < 2 * cfg.grid_size:
        raise FeatureError(
            f"segments of {n // cfg.k_segments} samples too short for a "
            f"{cfg.grid_size}-bin bicoherence grid"
        )
    if n < cfg.frame_samples(clip.sample_rate):
        raise FeatureError("clip shorter than one analysis frame")

    mag01, phase01 = bispectral.bicoherence_grids(
        clip, cfg.k_segments, cfg.grid_size
    )
    try:
        c0 = cepstral.mfcc(clip, cfg)
    except (EmptyResult, ConfigError) as exc:
        raise FeatureError(str(exc)) from exc
    c1 = cepstral.delta(c0)
    c2 = cepstral.delta(c1)
    return FeatureVector(
        bico_mag=moments(mag01),
        bico_phase=moments(phase01),
        mfcc_stats=_mean_var(c0.values),
        delta_stats=_mean_var(c1.values),
        delta2_stats=_mean_var(c2.values),
        label=label,
    )


def feature_values(clip, cfg):
    """Unlabeled 14-entry feature array for prediction paths."""
    return extract_feature_vector(clip, ClassLabel.HUMAN, cfg).values()


# ---------------------------------------------------------------------------
# Feature tables
# ---------------------------------------------------------------------------


class FeatureTable:
    """Row-ordered collection of feature vectors with a column subset tag.

    All 14 columns are stored regardless of the subset; the tag only
    restricts what `matrix()` and `columns()` expose, so re-selecting is
    cheap and never touches rows or labels.
    """

    def __init__(self, matrix, labels, subset="all"):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != len(FEATURE_COLUMNS):
            raise ValueError("feature matrix must be (n, 14)")
        if matrix.shape[0] != len(labels):
            raise ValueError("row/label count mismatch")
        if subset not in SUBSET_COLUMNS:
            raise ValueError(f"unknown feature subset {subset!r}")
        self._matrix = matrix
        self.labels = [
            lab.value if isinstance(lab, ClassLabel) else str(lab) for lab in labels
        ]
        self.subset = subset

    @classmethod
    def from_vectors(cls, vectors, subset="all"):
        matrix = np.stack([v.values() for v in vectors]) if vectors else np.empty((0, 14))
        return cls(matrix, [v.label for v in vectors], subset)

    def __len__(self):
        return self._matrix.shape[0]

    def columns(self):
        return tuple(FEATURE_COLUMNS[i] for i in SUBSET_COLUMNS[self.subset])

    def matrix(self):
        return self._matrix[:, SUBSET_COLUMNS[self.subset]].copy()

    def full_matrix(self):
        return self._matrix.copy()

    def take(self, indices):
        """Row selection preserving the subset tag."""
        idx = np.asarray(indices, dtype=int)
        return FeatureTable(
            self._matrix[idx], [self.labels[i] for i in idx], self.subset
        )

    # -- persistence --------------------------------------------------------

    def to_csv(self, path, config=None, config_digest=None):
        """Write the full-precision CSV; config metadata goes in # comments."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if config_digest is not None:
                fh.write(f"# config_hash: {config_digest}\n")
            if config is not None:
                from .config import canonical_json

                fh.write(f"# config: {canonical_json(config.to_dict())}\n")
            writer = csv.writer(fh)
            writer.writerow(list(FEATURE_COLUMNS) + ["label"])
            for row, label in zip(self._matrix, self.labels):
                writer.writerow([repr(float(v)) for v in row] + [label])

    @classmethod
    def from_csv(cls, path):
        """Read a feature CSV; returns (table, config_dict_or_None, hash_or_None)."""
        import json

        config_data = None
        digest = None
        rows = []
        labels = []
        with open(path, encoding="utf-8") as fh:
            header = None
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# config_hash:"):
                    digest = line.split(":", 1)[1].strip()
                    continue
                if line.startswith("# config:"):
                    config_data = json.loads(line.split(":", 1)[1].strip())
                    continue
                if line.startswith("#") or not line.strip():
                    continue
                fields = next(csv.reader([line]))
                if header is None:
                    header = fields
                    expected = list(FEATURE_COLUMNS) + ["label"]
                    if fields != expected:
                        raise ValueError(f"unexpected feature CSV header: {fields}")
                    continue
                rows.append([float(v) for v in fields[:-1]])
                labels.append(fields[-1])
        if header is None:
            raise ValueError("feature CSV has no header")
        matrix = np.array(rows) if rows else np.empty((0, 14))
        return cls(matrix, labels), config_data, digest


def select_subset(table, subset):
    """Restrict the visible columns; rows and labels are untouched."""
    if subset not in SUBSET_COLUMNS:
        raise ValueError(f"unknown feature subset {subset!r}")
    return FeatureTable(table.full_matrix(), list(table.labels), subset)
