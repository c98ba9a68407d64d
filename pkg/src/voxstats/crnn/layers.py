"""Network layers with hand-derived backward passes.

Every layer implements:

  build(in_shape, rng) -> out_shape   (per-sample shapes, no batch dim)
  forward(x, train, rng) -> (y, cache)
  backward(dy, cache) -> (dx, grads)  with grads keyed like self.params

Parameters live in `self.params` as float64 arrays.  Dropout is the only
layer that consumes the forward RNG, and only in train mode with a nonzero
rate, so eval-mode forwards are pure functions of (params, input).
"""

import numpy as np

from .. import kernels
from ..errors import BuildError
from ..spectral import bilinear_resize


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


class Layer:
    """Base: parameter-free identity; subclasses override what they need."""

    def __init__(self):
        self.params = {}

    def build(self, in_shape, rng):
        return in_shape

    def forward(self, x, train, rng):
        return x, None

    def backward(self, dy, cache):
        return dy, {}

    def spec(self):
        return (self.NAME, {})


class Resize(Layer):
    """Bilinear resize of (H, W, 1) inputs to a fixed target size."""

    NAME = "resize"

    def __init__(self, height=32, width=32):
        super().__init__()
        self.height = height
        self.width = width

    def build(self, in_shape, rng):
        if len(in_shape) != 3 or in_shape[2] != 1:
            raise BuildError(f"resize expects (H, W, 1), got {in_shape}")
        return (self.height, self.width, 1)

    def forward(self, x, train, rng):
        b, h, w, _ = x.shape
        if (h, w) == (self.height, self.width):
            return x, (h, w, True)
        out = np.empty((b, self.height, self.width, 1))
        for i in range(b):
            out[i, :, :, 0] = bilinear_resize(x[i, :, :, 0], self.height, self.width)
        return out, (h, w, False)

    def backward(self, dy, cache):
        in_h, in_w, identity = cache
        if identity:
            return dy, {}
        b = dy.shape[0]
        rows = np.clip(
            (np.arange(self.height) + 0.5) * in_h / self.height - 0.5, 0, in_h - 1
        )
        cols = np.clip(
            (np.arange(self.width) + 0.5) * in_w / self.width - 0.5, 0, in_w - 1
        )
        r0 = np.floor(rows).astype(int)
        c0 = np.floor(cols).astype(int)
        r1 = np.minimum(r0 + 1, in_h - 1)
        c1 = np.minimum(c0 + 1, in_w - 1)
        wr = rows - r0
        wc = cols - c0
        dx = np.zeros((b, in_h, in_w, 1))
        for i in range(b):
            g = dy[i, :, :, 0]
            for ri, (a0, a1, fr) in enumerate(zip(r0, r1, wr)):
                np.add.at(dx[i, a0, :, 0], c0, g[ri] * (1 - fr) * (1 - wc))
                np.add.at(dx[i, a0, :, 0], c1, g[ri] * (1 - fr) * wc)
                np.add.at(dx[i, a1, :, 0], c0, g[ri] * fr * (1 - wc))
                np.add.at(dx[i, a1, :, 0], c1, g[ri] * fr * wc)
        return dx, {}

    def spec(self):
        return (self.NAME, {"height": self.height, "width": self.width})


class Normalize(Layer):
    """Per-sample min-max normalization onto [0, 1]; constant input maps to 0."""

    NAME = "normalize"

    def forward(self, x, train, rng):
        b = x.shape[0]
        flat = x.reshape(b, -1)
        lo = flat.min(axis=1)
        hi = flat.max(axis=1)
        den = hi - lo
        safe = np.where(den > 0, den, 1.0)
        y = (flat - lo[:, None]) / safe[:, None]
        y[den == 0] = 0.0
        return y.reshape(x.shape), (flat.argmin(axis=1), flat.argmax(axis=1),
                                    den, y.copy())

    def backward(self, dy, cache):
        qmin, qmax, den, y = cache
        b = dy.shape[0]
        g = dy.reshape(b, -1).copy()
        dx = np.zeros_like(g)
        rows = np.arange(b)
        live = den > 0
        safe = np.where(live, den, 1.0)
        dx[live] = g[live] / safe[live, None]
        sum_g = g.sum(axis=1) / safe
        sum_gy = (g * y).sum(axis=1) / safe
        np.subtract.at(dx, (rows[live], qmin[live]), sum_g[live] - sum_gy[live])
        np.subtract.at(dx, (rows[live], qmax[live]), sum_gy[live])
        return dx.reshape(dy.shape), {}


class Conv2D(Layer):
    """Valid 3x3 (configurable) convolution, stride 1, optional ReLU."""

    NAME = "conv"

    def __init__(self, filters, kernel=3, activation="relu"):
        super().__init__()
        self.filters = filters
        self.kernel = kernel
        self.activation = activation

    def build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise BuildError(f"conv expects (H, W, C), got {in_shape}")
        h, w, c = in_shape
        k = self.kernel
        if h < k or w < k:
            raise BuildError(f"conv kernel {k} larger than input {h}x{w}")
        fan_in = k * k * c
        self.params = {
            "w": rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(k, k, c, self.filters)),
            "b": np.zeros(self.filters),
        }
        return (h - k + 1, w - k + 1, self.filters)

    def forward(self, x, train, rng):
        pre = kernels.conv2d_forward(x, self.params["w"], self.params["b"])
        if self.activation == "relu":
            return np.maximum(pre, 0.0), (x, pre)
        return pre, (x, pre)

    def backward(self, dy, cache):
        x, pre = cache
        dpre = dy * (pre > 0) if self.activation == "relu" else dy
        dx, dw, db = kernels.conv2d_backward(x, self.params["w"], dpre)
        return dx, {"w": dw, "b": db}

    def spec(self):
        return (self.NAME, {"filters": self.filters, "kernel": self.kernel,
                            "activation": self.activation})


class MaxPool2(Layer):
    """2x2 max pooling with stride 2."""

    NAME = "maxpool"

    def build(self, in_shape, rng):
        h, w, c = in_shape
        if h % 2 or w % 2:
            raise BuildError(f"maxpool needs even spatial dims, got {h}x{w}")
        return (h // 2, w // 2, c)

    def forward(self, x, train, rng):
        y, switches = kernels.maxpool2_forward(x)
        return y, (switches, x.shape[1], x.shape[2])

    def backward(self, dy, cache):
        switches, h, w = cache
        return kernels.maxpool2_backward(dy, switches, h, w), {}


class Dropout(Layer):
    """Inverted dropout; identity in eval mode or at rate 0."""

    NAME = "dropout"

    def __init__(self, rate):
        super().__init__()
        self.rate = rate

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            return x, None
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, dy, cache):
        if cache is None:
            return dy, {}
        return dy * cache, {}

    def spec(self):
        return (self.NAME, {"rate": self.rate})


class SqueezeToSequence(Layer):
    """(H, W, C) -> sequence of H timesteps with W*C features each."""

    NAME = "squeeze"

    def build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise BuildError(f"squeeze expects (H, W, C), got {in_shape}")
        h, w, c = in_shape
        return (h, w * c)

    def forward(self, x, train, rng):
        b, h, w, c = x.shape
        return x.reshape(b, h, w * c), (h, w, c)

    def backward(self, dy, cache):
        h, w, c = cache
        return dy.reshape(dy.shape[0], h, w, c), {}


class BiLSTM(Layer):
    """Bidirectional LSTM returning the full sequence of both directions.

    Gate layout in the fused matrices is (input, forget, cell, output).
    Output feature t is [h_forward_t, h_backward_t], so size 2 * hidden.
    """

    NAME = "bilstm"

    def __init__(self, hidden):
        super().__init__()
        self.hidden = hidden

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise BuildError(f"bilstm expects (T, F), got {in_shape}")
        t, f = in_shape
        h = self.hidden
        self.params = {}
        for tag in ("f", "b"):
            lim_x = np.sqrt(6.0 / (f + 4 * h))
            lim_h = np.sqrt(6.0 / (h + 4 * h))
            self.params[f"wx_{tag}"] = rng.uniform(-lim_x, lim_x, size=(f, 4 * h))
            self.params[f"wh_{tag}"] = rng.uniform(-lim_h, lim_h, size=(h, 4 * h))
            self.params[f"b_{tag}"] = np.zeros(4 * h)
        return (t, 2 * h)

    def _run(self, x, tag, reverse):
        wx = self.params[f"wx_{tag}"]
        wh = self.params[f"wh_{tag}"]
        b = self.params[f"b_{tag}"]
        bsz, t_len, _ = x.shape
        h_dim = self.hidden
        h = np.zeros((bsz, h_dim))
        c = np.zeros((bsz, h_dim))
        hs = np.zeros((bsz, t_len, h_dim))
        steps = []
        order = range(t_len - 1, -1, -1) if reverse else range(t_len)
        for t in order:
            z = x[:, t, :] @ wx + h @ wh + b
            zi, zf, zg, zo = np.split(z, 4, axis=1)
            gi = sigmoid(zi)
            gf = sigmoid(zf)
            gg = np.tanh(zg)
            go = sigmoid(zo)
            c_new = gf * c + gi * gg
            tc = np.tanh(c_new)
            steps.append((t, x[:, t, :], h, c, gi, gf, gg, go, tc))
            h = go * tc
            c = c_new
            hs[:, t, :] = h
        return hs, steps

    def _run_backward(self, dhs, steps, tag, dx):
        wx = self.params[f"wx_{tag}"]
        wh = self.params[f"wh_{tag}"]
        dwx = np.zeros_like(wx)
        dwh = np.zeros_like(wh)
        db = np.zeros(4 * self.hidden)
        bsz = dhs.shape[0]
        dh_next = np.zeros((bsz, self.hidden))
        dc_next = np.zeros((bsz, self.hidden))
        for t, xt, h_prev, c_prev, gi, gf, gg, go, tc in reversed(steps):
            dh = dhs[:, t, :] + dh_next
            do = dh * tc
            dc = dc_next + dh * go * (1.0 - tc * tc)
            df = dc * c_prev
            di = dc * gg
            dg = dc * gi
            dz = np.concatenate(
                [
                    di * gi * (1.0 - gi),
                    df * gf * (1.0 - gf),
                    dg * (1.0 - gg * gg),
                    do * go * (1.0 - go),
                ],
                axis=1,
            )
            dwx += xt.T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t, :] += dz @ wx.T
            dh_next = dz @ wh.T
            dc_next = dc * gf
        return {f"wx_{tag}": dwx, f"wh_{tag}": dwh, f"b_{tag}": db}

    def forward(self, x, train, rng):
        hs_f, steps_f = self._run(x, "f", reverse=False)
        hs_b, steps_b = self._run(x, "b", reverse=True)
        return np.concatenate([hs_f, hs_b], axis=2), (x.shape, steps_f, steps_b)

    def backward(self, dy, cache):
        x_shape, steps_f, steps_b = cache
        h = self.hidden
        dx = np.zeros(x_shape)
        grads = self._run_backward(dy[:, :, :h], steps_f, "f", dx)
        grads.update(self._run_backward(dy[:, :, h:], steps_b, "b", dx))
        return dx, grads

    def spec(self):
        return (self.NAME, {"hidden": self.hidden})


class Flatten(Layer):
    NAME = "flatten"

    def build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), {}


class Dense(Layer):
    NAME = "dense"

    def __init__(self, units, activation="relu"):
        super().__init__()
        self.units = units
        self.activation = activation

    def build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise BuildError(f"dense expects a flat input, got {in_shape}")
        fan_in = in_shape[0]
        self.params = {
            "w": rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, self.units)),
            "b": np.zeros(self.units),
        }
        return (self.units,)

    def forward(self, x, train, rng):
        pre = x @ self.params["w"] + self.params["b"]
        if self.activation == "relu":
            return np.maximum(pre, 0.0), (x, pre)
        return pre, (x, pre)

    def backward(self, dy, cache):
        x, pre = cache
        dpre = dy * (pre > 0) if self.activation == "relu" else dy
        return (
            dpre @ self.params["w"].T,
            {"w": x.T @ dpre, "b": dpre.sum(axis=0)},
        )

    def spec(self):
        return (self.NAME, {"units": self.units, "activation": self.activation})


class Softmax(Layer):
    """Terminal layer; the network keeps logits and applies this on demand."""

    NAME = "softmax"

    def forward(self, x, train, rng):
        return softmax(x), None


LAYER_REGISTRY = {
    cls.NAME: cls
    for cls in (Resize, Normalize, Conv2D, MaxPool2, Dropout,
                SqueezeToSequence, BiLSTM, Flatten, Dense, Softmax)
}


def layer_from_spec(spec):
    name, kwargs = spec
    return LAYER_REGISTRY[name](**kwargs)
