"""Per-episode classifiers over unit-norm features.

Both classifiers produce a :class:`PrototypeSet` of unit class vectors and
predict through the scaled-cosine softmax ``softmax(gamma * W @ x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import EmptyClass, NonFiniteLoss, ZeroVector
from .transforms import l2_normalize


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """N x d matrix of unit class vectors."""

    W: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        W.flags.writeable = False
        object.__setattr__(self, "W", W)

    @property
    def n_way(self) -> int:
        return self.W.shape[0]

    def predict(self, x) -> np.ndarray:
        """Predicted class per row (argmax cosine, ties to the lower id)."""
        return np.argmax(np.atleast_2d(x) @ self.W.T, axis=1)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 10.0
    learning_rate: float = 0.01
    epochs: int = 100
    init: Literal["ncc", "zeros", "random"] = "ncc"
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.init == "zeros":
            raise ValueError("zero weights cannot be normalized in the forward pass")
        if self.init not in ("ncc", "random"):
            raise ValueError(f"unknown init {self.init!r}")


def _check_support(x, y, n_way):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("support vectors and labels differ in length")
    counts = np.bincount(y, minlength=n_way) if y.size else np.zeros(n_way, int)
    if y.size and (y.min() < 0 or y.max() >= n_way):
        raise ValueError(f"support labels must lie in [0, {n_way})")
    missing = np.flatnonzero(counts[:n_way] == 0)
    if missing.size:
        raise EmptyClass(f"no support samples for class(es) {missing.tolist()}")
    return x, y, counts


def fit_ncc(x, y, n_way: int) -> PrototypeSet:
    """Nearest-centroid prototypes: L2-normalized per-class support means."""
    x, y, counts = _check_support(x, y, n_way)
    sums = np.zeros((n_way, x.shape[1]))
    np.add.at(sums, y, x)
    return PrototypeSet(l2_normalize(sums / counts[:, None]))


def predict_cosine(protos: PrototypeSet, x, gamma: float) -> np.ndarray:
    """Class probabilities ``softmax(gamma * w_c . x)``; rows for 2-D ``x``."""
    return softmax(gamma * (np.asarray(x, dtype=np.float64) @ protos.W.T), axis=-1)


def cosine_softmax_loss(V, x, y, gamma):
    """Mean cross-entropy and its gradient w.r.t. the unnormalized weights.

    The forward pass normalizes each row of ``V``; the gradient is taken
    through that normalization.
    """
    with np.errstate(over="ignore"):
        norms = np.linalg.norm(V, axis=1, keepdims=True)
    if not np.all(np.isfinite(norms)):
        raise NonFiniteLoss("classifier weights overflowed; lower the learning rate")
    if np.any(norms <= 1e-12):
        raise ZeroVector("classifier weight row collapsed to zero")
    W = V / norms
    logits = gamma * (x @ W.T)
    logp = log_softmax(logits, axis=1)
    m = x.shape[0]
    loss = -logp[np.arange(m), y].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    dW = gamma * dlogits.T @ x
    # d(v/|v|)/dv = (I - w w^T) / |v|
    dV = (dW - np.sum(dW * W, axis=1, keepdims=True) * W) / norms
    return loss, dV


def fit_cosine_softmax(x, y, n_way: int, cfg: TrainConfig = TrainConfig(),
                       history: list | None = None) -> PrototypeSet:
    """Full-batch gradient descent on the cosine-softmax cross-entropy.

    If ``history`` is given, the loss before each update is appended to it.
    """
    x, y, _ = _check_support(x, y, n_way)
    if cfg.init == "ncc":
        init = fit_ncc(x, y, n_way)
        if cfg.epochs == 0:
            return init
        V = init.W.copy()
    else:
        V = np.random.default_rng(cfg.seed).standard_normal((n_way, x.shape[1]))
    for _ in range(cfg.epochs):
        loss, grad = cosine_softmax_loss(V, x, y, cfg.gamma)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise NonFiniteLoss(f"loss became {loss}; lower the learning rate")
        if history is not None:
            history.append(float(loss))
        with np.errstate(over="ignore", invalid="ignore"):
            V = V - cfg.learning_rate * grad
    if not np.all(np.isfinite(V)) or not np.all(np.isfinite(np.linalg.norm(V, axis=1))):
        raise NonFiniteLoss("weights became non-finite; lower the learning rate")
    return PrototypeSet(l2_normalize(V))


@dataclass(frozen=True)
class ClassifierSpec:
    kind: Literal["ncc", "cosine"] = "ncc"
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if self.kind not in ("ncc", "cosine"):
            raise ValueError(f"unknown classifier {self.kind!r}")

    def fit(self, x, y, n_way: int) -> PrototypeSet:
        if self.kind == "ncc":
            return fit_ncc(x, y, n_way)
        return fit_cosine_softmax(x, y, n_way, self.train)
