"""Classifiers over embeddings, plus kNN directly on NCD distances.

All predictors return an (m, C) array of class probabilities whose rows sum
to one. Ties are broken toward the lower index everywhere so results are
reproducible across platforms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import (
    DimensionMismatch,
    EmptyClass,
    IndexOutOfRange,
    KTooLarge,
    SingleClassTraining,
)

log = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_L2 = 1e-4
DEFAULT_LR = 0.1
DEFAULT_EPOCHS = 500
MAX_LR_HALVINGS = 8
VAR_FLOOR = 1e-9

_CHUNK = 256


@dataclass(frozen=True)
class LabeledVectors:
    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.intp)
        if X.ndim != 2 or len(X) != len(y):
            raise DimensionMismatch(f"X shape {X.shape} does not match {len(y)} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix has non-finite entries")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise ValueError("label index out of range")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def predict_labels(proba: np.ndarray) -> np.ndarray:
    """Argmax with ties resolved to the lowest class index."""
    return np.argmax(proba, axis=1)


def _vote(neighbor_labels: np.ndarray, n_classes: int) -> np.ndarray:
    k = neighbor_labels.shape[1]
    out = np.zeros((neighbor_labels.shape[0], n_classes))
    rows = np.repeat(np.arange(neighbor_labels.shape[0]), k)
    np.add.at(out, (rows, neighbor_labels.ravel()), 1.0)
    return out / k


def _nearest(dist: np.ndarray, k: int) -> np.ndarray:
    # stable sort: equal distances keep training order
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def knn_fit_predict(train: LabeledVectors, X_test: np.ndarray, k: int = DEFAULT_K) -> np.ndarray:
    """Euclidean k-nearest-neighbour vote fractions."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if k < 1 or k > len(train.y):
        raise KTooLarge(f"k={k} with {len(train.y)} training points")
    if X_test.shape[1] != train.X.shape[1]:
        raise DimensionMismatch("test feature width differs from training")
    out = np.empty((len(X_test), train.n_classes))
    for start in range(0, len(X_test), _CHUNK):
        block = X_test[start:start + _CHUNK]
        diff = block[:, None, :] - train.X[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        out[start:start + _CHUNK] = _vote(train.y[_nearest(dist, k)], train.n_classes)
    return out


def ncd_knn_predict(
    dist: np.ndarray,
    y: Sequence[int],
    train_idx: Sequence[int],
    test_idx: Sequence[int],
    n_classes: int,
    k: int = DEFAULT_K,
) -> np.ndarray:
    """kNN vote using NCD values ``dist[test, train]`` as the distance.

    ``y`` holds the class index of every row of ``dist``; only the training
    entries are read.
    """
    dist = np.asarray(getattr(dist, "values", dist), dtype=np.float64)
    train_idx = np.asarray(train_idx, dtype=np.intp)
    test_idx = np.asarray(test_idx, dtype=np.intp)
    n = dist.shape[0]
    for idx in (train_idx, test_idx):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexOutOfRange(f"indices must lie in [0, {n})")
    if np.intersect1d(train_idx, test_idx).size:
        raise IndexOutOfRange("train and test indices overlap")
    if k < 1 or k > len(train_idx):
        raise KTooLarge(f"k={k} with {len(train_idx)} training points")
    y_train = np.asarray(y, dtype=np.intp)[train_idx]
    block = dist[np.ix_(test_idx, train_idx)]
    return _vote(y_train[_nearest(block, k)], n_classes)


# ---------------------------------------------------------------- logistic regression


@dataclass
class LogRegModel:
    W: np.ndarray  # (q, C)
    b: np.ndarray  # (C,)
    lr: float
    losses: list[float]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return logreg_predict(self, X)


def logreg_loss_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    ``Y`` is the one-hot (m, C) target matrix.
    """
    m = len(X)
    logits = X @ W + b
    logp = logits - logsumexp(logits, axis=1, keepdims=True)
    loss = -np.sum(Y * logp) / m + 0.5 * l2 * np.sum(W * W)
    err = (np.exp(logp) - Y) / m
    return float(loss), X.T @ err + l2 * W, err.sum(axis=0)


def _descend(X, Y, l2, lr, epochs):
    W = np.zeros((X.shape[1], Y.shape[1]))
    b = np.zeros(Y.shape[1])
    loss, gW, gb = logreg_loss_grad(W, b, X, Y, l2)
    losses = [loss]
    for _ in range(epochs):
        W -= lr * gW
        b -= lr * gb
        loss, gW, gb = logreg_loss_grad(W, b, X, Y, l2)
        if loss > losses[-1]:
            return W, b, losses, False
        losses.append(loss)
    return W, b, losses, True


def logreg_fit(
    train: LabeledVectors,
    l2: float = DEFAULT_L2,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    seed: int = 0,
) -> LogRegModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Weights start at zero, so ``seed`` has no effect on the result; it is
    accepted to keep the classifier interface uniform. If the training loss
    ever increases, the run restarts with half the learning rate.
    """
    if np.unique(train.y).size < 2:
        raise SingleClassTraining("logistic regression needs at least two classes")
    Y = np.eye(train.n_classes)[train.y]
    for _ in range(MAX_LR_HALVINGS + 1):
        W, b, losses, ok = _descend(train.X, Y, l2, lr, epochs)
        if ok:
            break
        lr /= 2
    else:
        log.warning("training loss still not monotone at lr=%g; keeping last run", lr * 2)
        lr *= 2
    return LogRegModel(W, b, lr, losses)


def logreg_predict(model: LogRegModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.W.shape[0]:
        raise DimensionMismatch(f"expected {model.W.shape[0]} features, got {X.shape[1]}")
    return softmax(X @ model.W + model.b, axis=1)


# ---------------------------------------------------------------- Gaussian naive Bayes


def gnb_fit_predict(
    train: LabeledVectors, X_test: np.ndarray, var_floor: float = VAR_FLOOR
) -> np.ndarray:
    """Gaussian naive Bayes with per-class, per-feature variances."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    C = train.n_classes
    counts = np.bincount(train.y, minlength=C)
    if np.any(counts == 0):
        missing = [train.class_names[c] for c in np.flatnonzero(counts == 0)]
        raise EmptyClass(f"no training samples for classes {missing}")
    if X_test.shape[1] != train.X.shape[1]:
        raise DimensionMismatch("test feature width differs from training")
    means = np.stack([train.X[train.y == c].mean(axis=0) for c in range(C)])
    var = np.stack([train.X[train.y == c].var(axis=0) for c in range(C)]) + var_floor
    log_prior = np.log(counts / counts.sum())
    # (m, C): sum over features of log N(x | mu, var)
    ll = -0.5 * (
        np.sum(np.log(2 * np.pi * var), axis=1)[None, :]
        + np.sum((X_test[:, None, :] - means[None]) ** 2 / var[None], axis=2)
    )
    joint = ll + log_prior
    return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
