"""Third-order spectral statistics.

A signal is cut into K equal segments; each segment's DFT contributes a
triple product Y[k1] Y[k2] conj(Y[k1+k2]).  Averaging magnitude and wrapped
phase over segments, then min-max normalizing each plane, yields the
bicoherence grids the feature stage consumes.  Quadratic phase coupling
(a triad with ang3 = ang1 + ang2) makes the averaged phase collapse to zero
at the coupled cell, which is what separates synthesis artifacts from
phase-incoherent audio.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError


@dataclass(frozen=True)
class BicoherenceGrid:
    """Segment-averaged triple-product magnitude and phase over (w1, w2).

    Both planes are raw averages; apply `minmax_normalize` before computing
    statistics so grids of differently scaled signals coincide.
    """

    magnitude: np.ndarray
    phase: np.ndarray
    grid_size: int
    k_segments: int


def _samples(clip_or_array):
    samples = getattr(clip_or_array, "samples", clip_or_array)
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError("bispectral analysis expects a mono signal")
    return x


def segment_signal(clip, k):
    """Split into k contiguous segments of floor(N/k) samples each.

    Trailing remainder samples are discarded.  Returns a (k, N//k) array.
    """
    x = _samples(clip)
    if k < 1:
        raise ConfigError("segment count must be at least 1")
    n = x.size
    if n < k:
        raise ConfigError(f"signal of {n} samples cannot make {k} segments")
    seg_len = n // k
    return x[: k * seg_len].reshape(k, seg_len)


def bispectrum_segment(segment, grid):
    """Complex triple-product matrix B[k1, k2] = Y[k1] Y[k2] conj(Y[k1+k2])."""
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError("segment must be 1-D")
    if x.size < 2 * grid:
        raise ConfigError(
            f"segment of {x.size} samples too short for a {grid}-bin grid"
        )
    y = np.fft.fft(x)
    idx = np.add.outer(np.arange(grid), np.arange(grid))
    return np.outer(y[:grid], y[:grid]) * np.conj(y[idx])


def bicoherence_average(segments, grid):
    """Average triple-product magnitude and wrapped phase over segments.

    magnitude[k1,k2] = mean_K |Y_K[k1]| |Y_K[k2]| |Y_K[k1+k2]|
    phase[k1,k2]     = mean_K wrap(ang Y_K[k1] + ang Y_K[k2] - ang Y_K[k1+k2])

    with each phase summand wrapped to (-pi, pi] before averaging.
    """
    try:
        segs = np.asarray(segments, dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"segments must all have equal length: {exc}") from exc
    if segs.ndim == 1:
        segs = segs[None, :]
    if segs.ndim != 2 or segs.shape[0] < 1:
        raise ConfigError("need at least one segment, all of equal length")
    k, seg_len = segs.shape
    if seg_len < 2 * grid:
        raise ConfigError(
            f"segments of {seg_len} samples too short for a {grid}-bin grid"
        )
    spectra = np.fft.fft(segs, axis=1)
    mag_sum, phase_sum = kernels.bicoherence_sums(spectra, grid)
    return BicoherenceGrid(mag_sum / k, phase_sum / k, grid, k)


def minmax_normalize(grid):
    """Map onto [0, 1] via (x - min) / (max - min); constant input becomes 0."""
    m = np.asarray(grid, dtype=np.float64)
    if m.size == 0:
        raise ConfigError("cannot normalize an empty matrix")
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def bicoherence_grids(clip, k_segments, grid_size):
    """Clip-level helper: segment, average, then normalize both planes."""
    segs = segment_signal(clip, k_segments)
    raw = bicoherence_average(segs, grid_size)
    return minmax_normalize(raw.magnitude), minmax_normalize(raw.phase)
