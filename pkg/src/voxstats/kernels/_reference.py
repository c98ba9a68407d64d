"""Pure-numpy kernel implementations.

This is the fallback backend and the readable definition of what the
compiled kernels in `_fast.pyx` must compute.  Both backends keep the same
per-cell accumulation order so results agree to floating-point noise.
"""

import numpy as np


def conv2d_forward(x, w, b):
    """Valid 2-D cross-correlation, stride 1, channels-last.

    x: (B, H, W, Cin), w: (kh, kw, Cin, Cout), b: (Cout,)
    returns (B, H-kh+1, W-kw+1, Cout)
    """
    kh, kw = w.shape[0], w.shape[1]
    patches = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    # patches: (B, Ho, Wo, Cin, kh, kw)
    y = np.einsum("bijcpq,pqco->bijo", patches, w, optimize=True)
    return y + b


def conv2d_backward(x, w, dy):
    """Gradients of conv2d_forward w.r.t. input, weights and bias."""
    kh, kw = w.shape[0], w.shape[1]
    patches = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    dw = np.einsum("bijcpq,bijo->pqco", patches, dy, optimize=True)
    db = dy.sum(axis=(0, 1, 2))
    # Full correlation of dy with the kernel flipped in both spatial axes.
    pad = ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0))
    dy_pad = np.pad(dy, pad)
    dy_patches = np.lib.stride_tricks.sliding_window_view(
        dy_pad, (kh, kw), axis=(1, 2)
    )
    w_flip = w[::-1, ::-1]
    dx = np.einsum("bijopq,pqco->bijc", dy_patches, w_flip, optimize=True)
    return dx, dw, db


def maxpool2_forward(x):
    """2x2 max pooling, stride 2.

    Returns (y, switches) where switches holds, per output cell, the flat
    row-major index (h * W + w) of the winning input position.  Ties go to
    the first position in window scan order (0,0), (0,1), (1,0), (1,1).
    """
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError("maxpool2 requires even spatial dimensions")
    ho, wo = h // 2, w // 2
    windows = x.reshape(b, ho, 2, wo, 2, c).transpose(0, 1, 3, 2, 4, 5)
    flat = windows.reshape(b, ho, wo, 4, c)
    local = flat.argmax(axis=3)  # first max wins, scan order as above
    y = np.take_along_axis(flat, local[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    rows = np.arange(ho)[None, :, None, None] * 2 + local // 2
    cols = np.arange(wo)[None, None, :, None] * 2 + local % 2
    switches = (rows * w + cols).astype(np.int64)
    return y, switches


def maxpool2_backward(dy, switches, h, w):
    """Route each pooled gradient back to its argmax input position."""
    b, ho, wo, c = dy.shape
    dx = np.zeros((b, h, w, c), dtype=dy.dtype)
    rows = switches // w
    cols = switches % w
    bi = np.arange(b)[:, None, None, None]
    ci = np.arange(c)[None, None, None, :]
    np.add.at(dx, (bi, rows, cols, ci), dy)
    return dx


def _wrap_angle(a):
    """Wrap to (-pi, pi]; identical branch handling to the compiled kernel."""
    w = np.mod(a + np.pi, 2.0 * np.pi)
    w = np.where(w == 0.0, 2.0 * np.pi, w)
    return w - np.pi


def bicoherence_sums(spectra, grid):
    """Accumulate triple-product magnitude and wrapped phase sums.

    spectra: (K, M) complex segment spectra with M >= 2*grid - 1.
    Returns (mag_sum, phase_sum), each (grid, grid); callers divide by K.

    mag term   : |Y[k1]| * |Y[k2]| * |Y[k1+k2]|
    phase term : wrap(ang(Y[k1]) + ang(Y[k2]) - ang(Y[k1+k2]))
    """
    k, m = spectra.shape
    if m < 2 * grid - 1:
        raise ValueError("segment spectrum too short for the requested grid")
    idx = np.add.outer(np.arange(grid), np.arange(grid))
    mag_sum = np.zeros((grid, grid))
    phase_sum = np.zeros((grid, grid))
    # Segment-by-segment accumulation keeps the reduction order fixed.
    for s in range(k):
        mags = np.abs(spectra[s])
        angs = np.angle(spectra[s])
        mag_sum += np.outer(mags[:grid], mags[:grid]) * mags[idx]
        phase_sum += _wrap_angle(
            np.add.outer(angs[:grid], angs[:grid]) - angs[idx]
        )
    return mag_sum, phase_sum
