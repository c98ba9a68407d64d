"""MFCC extraction and first/second temporal differences."""

from dataclasses import dataclass

import numpy as np

from . import spectral


@dataclass(frozen=True)
class CepstralMatrix:
    """frames x coefficients matrix; kind is mfcc, delta or delta2."""

    values: np.ndarray
    kind: str


def dct_matrix(n):
    """Orthonormal DCT-II matrix: M[k, m] = s_k cos(pi k (m + 0.5) / n)."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (m + 0.5) / n)
    mat[0] *= np.sqrt(1.0 / n)
    mat[1:] *= np.sqrt(2.0 / n)
    return mat


def dct_ii(vec):
    """Orthonormal DCT-II of a single vector."""
    x = np.asarray(vec, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("dct_ii expects a non-empty 1-D sequence")
    return dct_matrix(x.size) @ x


def mfcc(clip, cfg):
    """Mel-frequency cepstral coefficients, one row per frame.

    Per frame: window, power spectrum, mel filterbank, log (with the shared
    epsilon floor), DCT-II, then keep the first cfg.n_coeffs coefficients.
    Coefficient 0 is kept.
    """
    mel = spectral.mel_spectrogram(clip, cfg)
    dct = dct_matrix(cfg.n_mels)[: cfg.n_coeffs]
    return CepstralMatrix(mel.frames @ dct.T, "mfcc")


_NEXT_KIND = {"mfcc": "delta", "delta": "delta2"}


def delta(mat):
    """Row-wise first difference; row 0 is zero so the shape is preserved.

    Applying delta to an mfcc matrix gives the delta cepstrum; applying it
    again gives the delta-square cepstrum.
    """
    values = mat.values
    out = np.zeros_like(values)
    if values.shape[0] > 1:
        out[1:] = values[1:] - values[:-1]
    try:
        kind = _NEXT_KIND[mat.kind]
    except KeyError:
        raise ValueError(f"no difference kind beyond {mat.kind!r}") from None
    return CepstralMatrix(out, kind)
