"""Shared fixtures and independent oracles for the test suite.

The oracles here evaluate defining formulas directly (dense transform
matrices, two-pass statistics, per-cell normalized triple products) so they
stay independent of the library's fast paths.
"""

import struct

import numpy as np
import pytest

from voxstats.audio_io import AudioClip


# ---------------------------------------------------------------------------
# Transform oracles
# ---------------------------------------------------------------------------


def naive_dft(x):
    """Direct evaluation of Y[k] = sum_t x[t] exp(-2i pi k t / n)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    k = np.arange(n)[:, None]
    t = np.arange(n)[None, :]
    return np.exp(-2j * np.pi * k * t / n) @ x


def naive_dct_ii(x):
    """Direct orthonormal DCT-II: c[k] = s_k sum_m x[m] cos(pi k (m+0.5)/n)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    out = np.zeros(n)
    for k in range(n):
        acc = 0.0
        for m in range(n):
            acc += x[m] * np.cos(np.pi * k * (m + 0.5) / n)
        scale = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        out[k] = scale * acc
    return out


def two_pass_moments(values):
    """Brute-force population moments used to check the fast path."""
    x = np.asarray(values, dtype=np.float64).ravel()
    mean = sum(x) / len(x)
    var = sum((v - mean) ** 2 for v in x) / len(x)
    if var == 0:
        return mean, 0.0, 0.0, 0.0
    sd = np.sqrt(var)
    skew = sum(((v - mean) / sd) ** 3 for v in x) / len(x)
    kurt = sum(((v - mean) / sd) ** 4 for v in x) / len(x)
    return mean, var, skew, kurt


def eq6_bicoherence(segments, grid):
    """Per-cell normalized bispectrum estimate over segments.

    |sum_s Y_s[k1] Y_s[k2] conj(Y_s[k1+k2])| divided by
    sqrt(sum_s |Y_s[k1] Y_s[k2]|^2 * sum_s |Y_s[k1+k2]|^2); lies in [0, 1].
    """
    spectra = np.fft.fft(np.asarray(segments, dtype=np.float64), axis=1)
    idx = np.add.outer(np.arange(grid), np.arange(grid))
    num = np.zeros((grid, grid), dtype=complex)
    d1 = np.zeros((grid, grid))
    d2 = np.zeros((grid, grid))
    for y in spectra:
        pair = np.outer(y[:grid], y[:grid])
        num += pair * np.conj(y[idx])
        d1 += np.abs(pair) ** 2
        d2 += np.abs(y[idx]) ** 2
    return np.abs(num) / np.sqrt(d1 * d2 + 1e-300)


def coupled_triad(k_segments, seg_len, m1, m2, phi1, phi2, phase_offset=0.0):
    """Three tones at segment-aligned bins m1, m2, m1+m2.

    phase_offset=0 satisfies the quadratic phase relation exactly; a
    nonzero offset breaks it while keeping the same spectrum.
    """
    t = np.arange(k_segments * seg_len)
    w1 = 2 * np.pi * m1 / seg_len
    w2 = 2 * np.pi * m2 / seg_len
    signal = (
        np.cos(w1 * t + phi1)
        + np.cos(w2 * t + phi2)
        + np.cos((w1 + w2) * t + phi1 + phi2 + phase_offset)
    )
    return signal.reshape(k_segments, seg_len)


# ---------------------------------------------------------------------------
# WAV fixtures (hand-assembled, independent of the library encoder)
# ---------------------------------------------------------------------------


def build_wav(payload, *, audio_format=1, channels=1, sample_rate=8000, bits=16):
    block_align = channels * bits // 8
    header = struct.pack(
        "<IHHIIHH", 16, audio_format, channels, sample_rate,
        sample_rate * block_align, block_align, bits,
    )
    body = b"fmt " + header + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def pcm16_wav(values, channels=1, sample_rate=8000):
    payload = struct.pack(f"<{len(values)}h", *values)
    return build_wav(payload, channels=channels, sample_rate=sample_rate)


def float32_wav(values, channels=1, sample_rate=8000):
    payload = struct.pack(f"<{len(values)}f", *values)
    return build_wav(
        payload, audio_format=3, channels=channels, sample_rate=sample_rate, bits=32
    )


# ---------------------------------------------------------------------------
# Signal helpers
# ---------------------------------------------------------------------------


def tone_clip(freq, duration_s=1.0, sample_rate=8000, amp=0.5, phase=0.0,
              source_id="tone"):
    t = np.arange(int(duration_s * sample_rate)) / sample_rate
    return AudioClip(amp * np.cos(2 * np.pi * freq * t + phase), sample_rate,
                     source_id)


def silence_clip(duration_s=1.0, sample_rate=8000):
    return AudioClip(np.zeros(int(duration_s * sample_rate)), sample_rate, "silence")


def noise_clip(duration_s=1.0, sample_rate=8000, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    n = int(duration_s * sample_rate)
    x = np.clip(rng.normal(0.0, scale, size=n), -1.0, 1.0)
    return AudioClip(x, sample_rate, f"noise-{seed}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# Network gradient checking
# ---------------------------------------------------------------------------


def activation_signature(net, caches):
    """Hash of every ReLU mask and pool routing in a forward pass.

    Central differences only estimate a derivative where the function is
    smooth on [theta - eps, theta + eps]; a signature change between the
    two evaluations marks a crossed kink, where the coordinate must be
    re-verified with a finer step instead.
    """
    import hashlib

    from voxstats.crnn import layers as L

    h = hashlib.sha256()
    for layer, cache in zip(net.layers, caches["layers"]):
        if isinstance(layer, (L.Conv2D, L.Dense)) and layer.activation == "relu":
            h.update(np.packbits(cache[1] > 0).tobytes())
        elif isinstance(layer, L.MaxPool2):
            h.update(cache[0].tobytes())
    return h.digest()


def network_grad_check(net, x, y, seed=1234, sample_per_tensor=None,
                       eps=1e-4, fine_eps=1e-6, tol=1e-4):
    """Central-difference check of backward() over all (or sampled) params.

    Returns (worst_rel_err, checked, refined) where refined counts the
    coordinates that crossed a ReLU/pool kink at the coarse step and were
    validated at fine_eps instead.
    """
    from voxstats.crnn.network import backward, cross_entropy, forward

    def eval_loss():
        logits, caches = forward(net, x, mode="train", dropout_seed=seed)
        return cross_entropy(logits, y), activation_signature(net, caches)

    _, caches = forward(net, x, mode="train", dropout_seed=seed)
    grads = backward(net, caches, y)
    base_sig = activation_signature(net, caches)

    def central_diff(value, pos, step):
        orig = value[pos]
        value[pos] = orig + step
        lp, sig_p = eval_loss()
        value[pos] = orig - step
        lm, sig_m = eval_loss()
        value[pos] = orig
        smooth = sig_p == base_sig and sig_m == base_sig
        return (lp - lm) / (2 * step), smooth

    def relative(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-3)

    worst = 0.0
    checked = 0
    refined = 0
    pick = np.random.default_rng(2024)
    for idx, name, value in net.parameters():
        g = grads[idx][name]
        positions = list(np.ndindex(value.shape))
        if sample_per_tensor is not None and len(positions) > sample_per_tensor:
            chosen = pick.choice(len(positions), size=sample_per_tensor,
                                 replace=False)
            positions = [positions[i] for i in chosen]
        for pos in positions:
            fd, smooth = central_diff(value, pos, eps)
            if not smooth:
                fd, _ = central_diff(value, pos, fine_eps)
                refined += 1
            worst = max(worst, relative(fd, g[pos]))
            checked += 1
    return worst, checked, refined
