"""Linear SVM trained with a Pegasos-style stochastic subgradient method."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, LengthMismatch, SingleClassDataset


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.features.shape[0] != self.labels.shape[0]:
            raise LengthMismatch(f"{self.features.shape[0]} rows vs {self.labels.shape[0]} labels")
        if np.isnan(self.features).any():
            raise ValueError("features contain NaN")
        if not np.isin(self.labels, (-1, 1)).all():
            raise ValueError("labels must be -1 or +1")
        if not self.provenance:
            self.provenance = [""] * len(self.labels)

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    reg_lambda: float
    epochs: int
    seed: int
    mean: np.ndarray
    scale: np.ndarray

    def decision(self, features) -> np.ndarray:
        X = np.atleast_2d(np.asarray(features, dtype=float))
        if X.shape[1] != self.weights.shape[0]:
            raise DimensionMismatch(f"expected {self.weights.shape[0]} features, got {X.shape[1]}")
        return _standardize(X, self.mean, self.scale) @ self.weights + self.bias


def _standardize(X, mean, scale):
    return (X - mean) * scale


def _fit_standardization(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # constant columns map to 0
    scale = np.where(std > 0, 1.0 / np.where(std > 0, std, 1.0), 0.0)
    return mean, scale


def train_svm(data: Dataset, reg_lambda: float | None = None, epochs: int = 100, seed: int = 0) -> LinearModel:
    """Minimize ``lam/2 ||w||^2 + mean hinge`` and return the averaged iterate.

    Each epoch visits the samples in a fresh seeded permutation; the step at
    iteration t is ``1/(lam t)`` followed by projection onto the ball of
    radius ``1/sqrt(lam)``. The bias is unregularized, takes the same step
    and is clipped to the same radius. The returned weights
    average the iterates of the last half of training.
    """
    M = len(data)
    if M == 0 or data.features.shape[1] == 0:
        raise EmptyDataset("dataset has no samples or no features")
    if np.unique(data.labels).size < 2:
        raise SingleClassDataset("training needs both labels")
    lam = 1.0 / M if reg_lambda is None else float(reg_lambda)
    if lam <= 0 or epochs < 1:
        raise ValueError("reg_lambda must be positive and epochs at least 1")
    mean, scale = _fit_standardization(data.features)
    X = _standardize(data.features, mean, scale)
    y = data.labels.astype(float)
    d = X.shape[1]
    rng = np.random.default_rng(seed)
    w, b = np.zeros(d), 0.0
    w_sum, b_sum, n_avg = np.zeros(d), 0.0, 0
    radius = 1.0 / np.sqrt(lam)
    total = epochs * M
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(M):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * (X[i] @ w + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y[i] * X[i]
                b += eta * y[i]
            nrm = np.linalg.norm(w)
            if nrm > radius:
                w *= radius / nrm
            # early steps are of size ~M; keep the bias on the same scale as w
            b = min(max(b, -radius), radius)
            if 2 * t > total:
                w_sum += w
                b_sum += b
                n_avg += 1
    return LinearModel(w_sum / n_avg, b_sum / n_avg, lam, epochs, seed, mean, scale)


def objective(model: LinearModel, data: Dataset) -> float:
    margins = data.labels * model.decision(data.features)
    return 0.5 * model.reg_lambda * float(model.weights @ model.weights) + float(
        np.mean(np.maximum(0.0, 1.0 - margins))
    )


def predict(model: LinearModel, features) -> np.ndarray:
    """Labels in {-1, +1}; points on the boundary get +1."""
    return np.where(model.decision(features) >= 0.0, 1, -1)


def accuracy(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted).ravel(), np.asarray(truth).ravel()
    if predicted.shape != truth.shape:
        raise LengthMismatch(f"{predicted.shape[0]} vs {truth.shape[0]}")
    if predicted.size == 0:
        raise EmptyDataset("nothing to score")
    return float(np.mean(predicted == truth))


def save_model(model: LinearModel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([repr(model.reg_lambda), model.epochs, model.seed, repr(float(model.bias))] + [repr(float(v)) for v in model.weights])
        w.writerow(["mean"] + [repr(float(v)) for v in model.mean])
        w.writerow(["scale"] + [repr(float(v)) for v in model.scale])


def load_model(path) -> LinearModel:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    head, mean_row, scale_row = rows
    return LinearModel(
        weights=np.array([float(v) for v in head[4:]]),
        bias=float(head[3]),
        reg_lambda=float(head[0]),
        epochs=int(head[1]),
        seed=int(head[2]),
        mean=np.array([float(v) for v in mean_row[1:]]),
        scale=np.array([float(v) for v in scale_row[1:]]),
    )
