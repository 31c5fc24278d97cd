"""Normalized signed distances and the decision functions built on them.

All classifications are scale invariant (distances divide by the model norm)
and tie-break deterministically: equal distances resolve to the smallest
class id, and a binary sum of exactly zero maps to the positive class.
"""
from __future__ import annotations

import csv

import numpy as np

from .errors import InvalidInput
from .kernels import gram
from .trainer import (
    ARGMAX,
    ARGMIN,
    BinaryModelPair,
    KernelClassModel,
    LinearClassModel,
    MulticlassModel,
)


def signed_distance(model, x) -> float | np.ndarray:
    """Normalized signed distance of ``x`` from the model hyperplane.

    Linear models return ``(w' x + theta) / |w|_2``; kernel models the
    kernel-space analogue ``(sum_i beta_i k(x^i, x) + theta) / |w|_H``.
    Accepts a single vector (returns a float) or a matrix of rows.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if isinstance(model, LinearClassModel):
        if X.shape[1] != model.w.shape[0]:
            raise InvalidInput(f"expected {model.w.shape[0]} features, got {X.shape[1]}")
        vals = (X @ model.w + model.theta) / model.norm_w
    elif isinstance(model, KernelClassModel):
        if X.shape[1] != model.train_features.shape[1]:
            raise InvalidInput(
                f"expected {model.train_features.shape[1]} features, got {X.shape[1]}")
        vals = (gram(model.spec, X, model.train_features) @ model.beta
                + model.theta) / model.norm_h
    else:
        raise InvalidInput(f"not a class model: {type(model).__name__}")
    return float(vals[0]) if single else vals


def distance_vector(model: MulticlassModel, x) -> np.ndarray:
    """Per-class normalized signed distances, aligned with class ids 1..C."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    cols = [signed_distance(mdl, X) for mdl in model.models]
    D = np.column_stack(cols)
    if not np.all(np.isfinite(D)):
        raise InvalidInput("non-finite distance encountered")
    return D[0] if single else D


def classify_argmin(model: MulticlassModel, x) -> int | np.ndarray:
    """Class whose hyperplane is nearest in absolute normalized distance."""
    if model.rule != ARGMIN:
        raise InvalidInput(f"model rule is {model.rule!r}, not {ARGMIN!r}")
    D = distance_vector(model, np.atleast_2d(np.asarray(x, dtype=float)))
    ids = np.argmin(np.abs(D), axis=1) + 1
    return int(ids[0]) if np.asarray(x).ndim == 1 else ids


def classify_argmax(model: MulticlassModel, x) -> int | np.ndarray:
    """Class with the largest signed normalized distance."""
    if model.rule != ARGMAX:
        raise InvalidInput(f"model rule is {model.rule!r}, not {ARGMAX!r}")
    D = distance_vector(model, np.atleast_2d(np.asarray(x, dtype=float)))
    ids = np.argmax(D, axis=1) + 1
    return int(ids[0]) if np.asarray(x).ndim == 1 else ids


def classify(model: MulticlassModel, x):
    """Dispatch on the model's decision rule."""
    return classify_argmin(model, x) if model.rule == ARGMIN else classify_argmax(model, x)


def classify_binary(models: BinaryModelPair, x) -> int | np.ndarray:
    """Sign of the summed positive/negative distances; zero maps to +1."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    total = signed_distance(models.positive, X) + signed_distance(models.negative, X)
    labels = np.where(total >= 0.0, 1, -1)
    return int(labels[0]) if single else labels


def accuracy(model: MulticlassModel, X, labels) -> float:
    """Percentage of rows classified to their label."""
    pred = classify(model, np.asarray(X, dtype=float))
    return 100.0 * float(np.mean(pred == np.asarray(labels)))


def batch_predict_csv(model: MulticlassModel, features_path, out_path,
                      scaling=None) -> int:
    """Read a feature CSV (header row, numeric cells) and write predictions.

    Output columns: ``row``, ``predicted_class`` and one ``distance_<c>``
    column per class.  ``scaling`` optionally maps the inputs through the
    scaler the model was trained with.  Returns the number of rows written.
    """
    with open(features_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidInput(f"{features_path}: empty file")
        rows = [[float(cell) for cell in row] for row in reader if row]
    X = np.asarray(rows, dtype=float)
    if scaling is not None:
        X = scaling.transform(X)
    D = distance_vector(model, X)
    pred = classify(model, X)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "predicted_class"]
                        + [f"distance_{c + 1}" for c in range(model.num_classes)])
        for i in range(X.shape[0]):
            writer.writerow([i, int(pred[i])] + [repr(float(v)) for v in D[i]])
    return X.shape[0]
