"""Conv-recurrent spectrogram classifier with hand-derived gradients."""

from .network import (
    Network,
    analytic_parameter_count,
    backward,
    build_crnn32,
    cross_entropy,
    forward,
    load_network,
    predict_scores,
    save_network,
)
from .training import Adam, classify, clip_image, evaluate, history_to_csv, train

__all__ = [
    "Adam",
    "Network",
    "analytic_parameter_count",
    "backward",
    "build_crnn32",
    "classify",
    "clip_image",
    "cross_entropy",
    "evaluate",
    "forward",
    "history_to_csv",
    "load_network",
    "predict_scores",
    "save_network",
    "train",
]
