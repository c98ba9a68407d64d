"""Classical classifiers, cross-validation and evaluation metrics."""

from .io import load_model, save_model
from .metrics import ConfusionMatrix, MetricsReport, f1_score, metrics
from .models import (
    ALGO_KINDS,
    AlgoSpec,
    ClassifierModel,
    predict,
    project_labels,
    train_classifier,
)
from .validation import cross_validate, kfold_split, stratified_kfold

__all__ = [
    "ALGO_KINDS",
    "AlgoSpec",
    "ClassifierModel",
    "ConfusionMatrix",
    "MetricsReport",
    "cross_validate",
    "f1_score",
    "kfold_split",
    "load_model",
    "metrics",
    "predict",
    "project_labels",
    "save_model",
    "stratified_kfold",
    "train_classifier",
]
