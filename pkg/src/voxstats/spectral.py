"""Frequency-domain transforms: DFT, power spectrum, STFT, mel filterbank,
mel spectrogram and fixed-size spectrogram images.

All transforms are pure functions.  Filterbanks are plain weight matrices
that can be built once and shared across workers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyResult

EPS_LOG = 1e-10  # floor inside log so silence stays finite

_WINDOWS = {
    "hann": np.hanning,
    "hamming": np.hamming,
    "rectangular": np.ones,
}


@dataclass(frozen=True)
class ComplexSpectrum:
    """DFT output: complex bins plus the transform length."""

    bins: np.ndarray
    n: int


@dataclass(frozen=True)
class Spectrogram:
    """Time x frequency matrix; scale is 'power' or 'mel_log'."""

    frames: np.ndarray
    frame_len: int
    hop: int
    scale: str
    sample_rate: int = 0


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters: (n_filters, n_fft//2 + 1) nonnegative weights."""

    weights: np.ndarray
    f_min: float
    f_max: float


def dft(signal):
    """Full complex DFT, Y[k] = sum_t y[t] exp(-2i pi k t / n)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("dft expects a non-empty 1-D real sequence")
    return ComplexSpectrum(np.fft.fft(x), x.size)


def power_spectrum(spec):
    """P[k] = Y[k] * conj(Y[k]), real and nonnegative."""
    bins = spec.bins if isinstance(spec, ComplexSpectrum) else np.asarray(spec)
    return (bins * np.conj(bins)).real


def next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def window_function(name, length):
    try:
        return _WINDOWS[name](length)
    except KeyError:
        raise ConfigError(f"unknown window {name!r}") from None


def frame_signal(x, frame_len, hop):
    """View of consecutive frames: frame t covers [t*hop, t*hop + frame_len)."""
    if hop < 1:
        raise ConfigError("hop must be at least 1")
    if x.size < frame_len:
        raise EmptyResult("signal shorter than one frame")
    view = np.lib.stride_tricks.sliding_window_view(x, frame_len)
    return view[::hop]


def stft(clip, frame_len, hop, window="hann"):
    """Short-time power spectrogram.

    Frames are windowed, zero-padded to the next power of two and
    transformed; frame count is floor((N - frame_len) / hop) + 1.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigError("stft expects a mono clip")
    frames = frame_signal(x, frame_len, hop)
    win = window_function(window, frame_len) if isinstance(window, str) else window
    n_fft = next_pow2(frame_len)
    spec = np.fft.rfft(frames * win, n=n_fft, axis=1)
    power = (spec * np.conj(spec)).real
    return Spectrogram(power, frame_len, hop, "power", clip.sample_rate)


# ---------------------------------------------------------------------------
# Mel scale
# ---------------------------------------------------------------------------


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters, n_fft, sample_rate, f_min=0.0, f_max=None):
    """Triangular filters with centers equally spaced on the mel scale.

    Raises ConfigError when the FFT resolution cannot separate adjacent
    filter edges (two of the n_filters + 2 mel points land on one bin).
    """
    if n_filters < 1:
        raise ConfigError("need at least one mel filter")
    if n_fft & (n_fft - 1):
        raise ConfigError("n_fft must be a power of two")
    nyquist = sample_rate / 2.0
    f_max = nyquist if f_max is None else float(f_max)
    if not 0.0 <= f_min < f_max <= nyquist:
        raise ConfigError("need 0 <= f_min < f_max <= sample_rate / 2")

    mel_points = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_filters + 2)
    hz_points = mel_to_hz(mel_points)
    bin_points = np.floor((n_fft + 1) * hz_points / sample_rate).astype(int)
    if np.any(np.diff(bin_points) < 1):
        raise ConfigError(
            f"{n_filters} filters do not fit: adjacent mel points share an FFT bin"
        )

    weights = np.zeros((n_filters, n_fft // 2 + 1))
    for j in range(n_filters):
        left, center, right = bin_points[j : j + 3]
        for i in range(left, center):
            weights[j, i] = (i - left) / (center - left)
        for i in range(center, right):
            weights[j, i] = (right - i) / (right - center)
    return MelFilterbank(weights, f_min, f_max)


def mel_spectrogram(clip, cfg):
    """Log mel power: log(filterbank . power_frame + eps) per frame."""
    sr = clip.sample_rate
    frame_len = cfg.frame_samples(sr)
    hop = cfg.hop_samples(sr)
    power = stft(clip, frame_len, hop, window=cfg.window)
    fb = mel_filterbank(
        cfg.n_mels, next_pow2(frame_len), sr, f_min=cfg.f_min, f_max=cfg.f_max
    )
    mel_power = power.frames @ fb.weights.T
    return Spectrogram(np.log(mel_power + EPS_LOG), frame_len, hop, "mel_log", sr)


# ---------------------------------------------------------------------------
# Fixed-size images
# ---------------------------------------------------------------------------


def bilinear_resize(matrix, out_h, out_w):
    """Half-pixel-centered bilinear resize with edge clamping.

    Equal input/output sizes reproduce the input exactly; a 2:1 reduction
    averages disjoint 2x2 blocks.
    """
    m = np.asarray(matrix, dtype=np.float64)
    in_h, in_w = m.shape
    rows = np.clip((np.arange(out_h) + 0.5) * in_h / out_h - 0.5, 0, in_h - 1)
    cols = np.clip((np.arange(out_w) + 0.5) * in_w / out_w - 0.5, 0, in_w - 1)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)
    wr = (rows - r0)[:, None]
    wc = (cols - c0)[None, :]
    top = m[np.ix_(r0, c0)] * (1 - wc) + m[np.ix_(r0, c1)] * wc
    bottom = m[np.ix_(r1, c0)] * (1 - wc) + m[np.ix_(r1, c1)] * wc
    return top * (1 - wr) + bottom * wr


def minmax_scale(matrix):
    """(x - min) / (max - min); a constant matrix maps to all zeros."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def spectrogram_image(spec, height=32, width=32):
    """Resize a spectrogram to (height, width, 1) and min-max scale to [0, 1]."""
    frames = spec.frames if isinstance(spec, Spectrogram) else np.asarray(spec)
    if frames.size == 0:
        raise EmptyResult("empty spectrogram")
    resized = bilinear_resize(frames, height, width)
    return minmax_scale(resized)[:, :, None]
