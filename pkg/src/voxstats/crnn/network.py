"""The conv-recurrent detector: build, forward, backward, persistence.

The canonical stack (three convolutions, two bidirectional LSTMs) consumes
32x32x1 spectrogram images:

  resize -> normalize -> conv(32) -> conv(64) -> maxpool -> dropout
  -> conv(C) -> squeeze -> bilstm -> bilstm -> flatten -> dense
  -> dropout -> dense(num_classes) -> softmax

forward() returns logits; softmax is applied by the loss and by classify().
"""

import json
import struct

import numpy as np

from ..config import CrnnConfig
from ..errors import BuildError, ConfigError, ShapeError
from . import layers as L

NET_MAGIC = b"VXNET01\n"


class Network:
    """Layer stack plus parameter state; immutable shapes after build()."""

    def __init__(self, layer_list, num_classes, seed=0, classes=None,
                 feature_config=None):
        self.layers = layer_list
        self.num_classes = num_classes
        self.seed = seed
        self.classes = list(classes) if classes else [str(i) for i in range(num_classes)]
        self.feature_config = feature_config
        self.input_shape = None
        self.shapes = None

    def build(self, input_shape=(32, 32, 1)):
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0]))
        shape = tuple(input_shape)
        self.input_shape = shape
        self.shapes = [shape]
        for layer in self.layers:
            try:
                shape = layer.build(shape, rng)
            except BuildError:
                raise
            except Exception as exc:
                raise BuildError(f"{layer.NAME}: {exc}") from exc
            self.shapes.append(tuple(shape))
        return self

    def parameters(self):
        for idx, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield idx, name, value

    def parameter_count(self):
        return sum(v.size for _, _, v in self.parameters())


def build_crnn32(num_classes, cfg=None, seed=0, classes=None, feature_config=None):
    """Assemble and build the canonical stack for 2- or 4-way output."""
    if num_classes not in (2, 4):
        raise ConfigError(f"num_classes must be 2 or 4, got {num_classes}")
    cfg = cfg or CrnnConfig()
    stack = [
        L.Resize(32, 32),
        L.Normalize(),
        L.Conv2D(32, 3),
        L.Conv2D(64, 3),
        L.MaxPool2(),
        L.Dropout(cfg.dropout[0]),
        L.Conv2D(cfg.conv3_channels, 3),
        L.SqueezeToSequence(),
        L.BiLSTM(cfg.lstm_hidden[0]),
        L.BiLSTM(cfg.lstm_hidden[1]),
        L.Flatten(),
        L.Dense(cfg.dense_units, activation="relu"),
        L.Dropout(cfg.dropout[1]),
        L.Dense(num_classes, activation="none"),
        L.Softmax(),
    ]
    net = Network(stack, num_classes, seed=seed, classes=classes,
                  feature_config=feature_config)
    return net.build((32, 32, 1))


def analytic_parameter_count(net):
    """Closed-form parameter count from the layer specs and shape chain.

    conv: kh kw Cin Cout + Cout; bilstm: 2 * 4h (in + h + 1);
    dense: in * out + out; everything else is parameter-free.
    """
    total = 0
    for layer, in_shape in zip(net.layers, net.shapes[:-1]):
        if isinstance(layer, L.Conv2D):
            k, cin = layer.kernel, in_shape[2]
            total += k * k * cin * layer.filters + layer.filters
        elif isinstance(layer, L.BiLSTM):
            h, fin = layer.hidden, in_shape[1]
            total += 2 * 4 * h * (fin + h + 1)
        elif isinstance(layer, L.Dense):
            total += in_shape[0] * layer.units + layer.units
    return total


def forward(net, batch, mode="eval", dropout_seed=None):
    """Run the stack up to the logits; returns (logits, caches).

    Train mode draws dropout masks from a generator seeded with
    dropout_seed (falling back to the network seed), so a fixed seed gives
    a fixed forward pass.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or x.shape[3] != net.input_shape[2]:
        raise ShapeError(
            f"expected batch shaped (B, H, W, {net.input_shape[2]}), got {x.shape}"
        )
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    rng = None
    if mode == "train":
        rng = np.random.default_rng(
            net.seed if dropout_seed is None else dropout_seed
        )
    layer_caches = []
    for layer in net.layers[:-1]:  # final softmax applied on demand
        x, cache = layer.forward(x, mode == "train", rng)
        layer_caches.append(cache)
    return x, {"layers": layer_caches, "logits": x}


def cross_entropy(logits, labels):
    """Mean categorical cross-entropy from logits; labels are class indices."""
    labels = np.asarray(labels, dtype=int)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def backward(net, caches, labels):
    """Gradients of the mean cross-entropy for every parameter.

    Returns a list aligned with net.layers; entry i maps parameter names of
    layer i to gradient arrays.
    """
    logits = caches["logits"]
    labels = np.asarray(labels, dtype=int)
    b = logits.shape[0]
    probs = L.softmax(logits)
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    grads = [dict() for _ in net.layers]
    dy = dlogits
    for idx in range(len(net.layers) - 2, -1, -1):  # skip the softmax marker
        dy, layer_grads = net.layers[idx].backward(dy, caches["layers"][idx])
        grads[idx] = layer_grads
    return grads


def predict_scores(net, batch):
    logits, _ = forward(net, batch, mode="eval")
    return L.softmax(logits)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_network(net, path):
    """Versioned binary: JSON header plus little-endian float64 blobs."""
    tensors = [
        {"layer": idx, "name": name, "shape": list(value.shape)}
        for idx, name, value in net.parameters()
    ]
    config_digest = None
    if net.feature_config is not None:
        from ..config import config_hash

        config_digest = config_hash(net.feature_config)
    header = {
        "format": "voxstats-net",
        "version": 1,
        "num_classes": net.num_classes,
        "seed": net.seed,
        "classes": net.classes,
        "feature_config": net.feature_config,
        "config_hash": config_digest,
        "input_shape": list(net.input_shape),
        "layers": [layer.spec() for layer in net.layers],
        "tensors": tensors,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(NET_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for idx, name, value in net.parameters():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_network(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(NET_MAGIC))
        if magic != NET_MAGIC:
            raise ConfigError(f"{path} is not a network file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("version") != 1:
            raise ConfigError(f"unsupported network version {header.get('version')}")
        stack = [L.layer_from_spec(spec) for spec in header["layers"]]
        net = Network(
            stack,
            header["num_classes"],
            seed=header["seed"],
            classes=header["classes"],
            feature_config=header.get("feature_config"),
        )
        net.build(tuple(header["input_shape"]))
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            layer = net.layers[entry["layer"]]
            if entry["name"] not in layer.params:
                raise ConfigError(f"unexpected tensor {entry['name']!r} in {path}")
            if layer.params[entry["name"]].shape != shape:
                raise ConfigError(f"tensor shape mismatch for {entry['name']!r}")
            layer.params[entry["name"]] = data.copy()
    return net
