"""Feature normalizations: L2, CL2N, ZN and task-centroid projection removal.

Every transform returns unit-norm float64 vectors. Functions accept either a
single vector (1-D) or a batch of row vectors (2-D) where noted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from . import kernels
from .errors import MissingBase, MissingQuery, ZeroAfterProjection, ZeroStd, ZeroVector
from .feature_bank import FeatureBank

EPS = 1e-12
PARALLEL_TOL = 1e-9


def l2_normalize(x) -> np.ndarray:
    """Scale ``x`` (or each row of a 2-D ``x``) to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms <= EPS):
        raise ZeroVector("cannot normalize a vector with norm <= 1e-12")
    return x / norms


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= EPS or nb <= EPS:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _topk(base: FeatureBank, probe, k: int):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    norms = base.row_norms
    if norms.min() <= EPS:
        raise ZeroVector("base bank contains a row with norm <= 1e-12")
    probe = l2_normalize(np.ravel(probe))
    if probe.shape[0] != base.dim:
        raise ValueError(f"probe has dim {probe.shape[0]}, bank has {base.dim}")
    return kernels.topk_cosine(base.features, 1.0 / norms, np.ascontiguousarray(probe), k)


def top_k_neighbors(base: FeatureBank, probe, k: int) -> list[tuple[int, float]]:
    """The ``min(k, n)`` base rows with the largest cosine to ``probe``.

    Sorted by similarity descending; ties go to the smaller row index.
    Brute force: one pass over the bank with a size-k heap.
    """
    idx, sims = _topk(base, probe, k)
    return [(int(i), float(s)) for i, s in zip(idx, sims)]


@dataclass(frozen=True)
class CentroidEstimator:
    """How the task centroid direction is estimated.

    ``oracle`` averages support and query (transductive), ``support`` averages
    the support set, ``base-knn`` aggregates the ``k`` base rows closest to
    the support mean with weights proportional to ``cos**p``.
    """

    kind: Literal["oracle", "support", "base-knn"] = "base-knn"
    k: int = 100
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ("oracle", "support", "base-knn"):
            raise ValueError(f"unknown centroid estimator {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.p >= 0:
            raise ValueError("p must be >= 0")

    @classmethod
    def oracle(cls):
        return cls("oracle")

    @classmethod
    def support_mean(cls):
        return cls("support")

    @classmethod
    def base_neighbors(cls, k: int, p: float = 0.5):
        return cls("base-knn", k, p)


def neighbor_weights(sims, p: float) -> np.ndarray:
    """Normalized ``cos**p`` weights.

    Negative similarities are clamped to zero first (a fractional power of a
    negative number is undefined). If every clamped similarity is zero the
    weights fall back to uniform.
    """
    s = np.maximum(np.asarray(sims, dtype=np.float64), 0.0)
    if s.size == 0:
        raise ValueError("no similarities to weight")
    if p == 0:
        w = np.ones_like(s)
    else:
        w = s ** p
    total = w.sum()
    if total <= 0:
        return np.full(s.shape, 1.0 / s.size)
    return w / total


def estimate_task_centroid(support, query=None, base: FeatureBank | None = None,
                           est: CentroidEstimator = CentroidEstimator()) -> np.ndarray:
    """Unit direction approximating the task centroid.

    Support and query vectors are L2-normalized individually, so the result
    does not depend on their magnitudes.
    """
    support = l2_normalize(np.atleast_2d(support))
    if support.shape[0] == 0:
        raise ValueError("support set is empty")
    if est.kind == "oracle":
        if query is None or len(query) == 0:
            raise MissingQuery("the oracle centroid needs the query set")
        both = np.vstack([support, l2_normalize(np.atleast_2d(query))])
        return l2_normalize(both.mean(axis=0))
    support_mean = support.mean(axis=0)
    if est.kind == "support":
        return l2_normalize(support_mean)
    if base is None:
        raise MissingBase("the base-knn centroid needs a base bank")
    idx, sims = _topk(base, support_mean, est.k)
    weights = neighbor_weights(sims, est.p)
    neighbors = base.features[idx].astype(np.float64) / base.row_norms[idx, None]
    return l2_normalize(weights @ neighbors)


def remove_projection(x, c) -> np.ndarray:
    """Drop the component of unit ``x`` along unit ``c`` and renormalize.

    ``x`` may be a batch of rows.
    """
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    dots = x @ c
    if np.any(np.abs(dots) > 1.0 - PARALLEL_TOL):
        raise ZeroAfterProjection("feature is parallel to the centroid direction")
    residual = x - np.multiply.outer(dots, c)
    return l2_normalize(residual)


def zscore(x) -> np.ndarray:
    """Standardize each vector across its own components (population std)."""
    x = np.asarray(x, dtype=np.float64)
    std = x.std(axis=-1, keepdims=True)
    if np.any(std <= EPS):
        raise ZeroStd("cannot z-score a constant vector")
    return (x - x.mean(axis=-1, keepdims=True)) / std


TRANSFORM_KINDS = ("none", "l2", "cl2n", "zn", "tcpr")


@dataclass(frozen=True, eq=False)
class TransformPipeline:
    """A normalization chain, fitted once per episode.

    ``cl2n`` needs the base-bank mean and ``tcpr`` needs a centroid
    direction; :meth:`fit` fills both in.
    """

    kind: str = "l2"
    estimator: CentroidEstimator | None = None
    base_mean: np.ndarray | None = None
    c_task: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.kind!r}; expected one of {TRANSFORM_KINDS}")
        if self.kind == "tcpr" and self.estimator is None:
            object.__setattr__(self, "estimator", CentroidEstimator())

    @property
    def needs_base(self) -> bool:
        return self.kind == "cl2n" or (self.kind == "tcpr" and self.estimator.kind == "base-knn")

    @property
    def is_fitted(self) -> bool:
        if self.kind == "cl2n":
            return self.base_mean is not None
        if self.kind == "tcpr":
            return self.c_task is not None
        return True

    def fit(self, support, query=None, base: FeatureBank | None = None) -> "TransformPipeline":
        """Return a copy with the per-episode statistics computed.

        The query set is only consulted by the oracle centroid estimator.
        """
        if self.kind == "cl2n":
            if base is None:
                raise MissingBase("cl2n needs a base bank for its mean")
            return replace(self, base_mean=np.array(base.mean))
        if self.kind == "tcpr":
            use_query = query if self.estimator.kind == "oracle" else None
            c = estimate_task_centroid(support, use_query, base, self.estimator)
            return replace(self, c_task=c)
        return self


def apply_transform(pipeline: TransformPipeline, x) -> np.ndarray:
    if not pipeline.is_fitted:
        raise ValueError(f"{pipeline.kind} pipeline used before fit()")
    x = np.asarray(x, dtype=np.float64)
    kind = pipeline.kind
    if kind in ("none", "l2"):
        return l2_normalize(x)
    if kind == "cl2n":
        return l2_normalize(x - pipeline.base_mean)
    if kind == "zn":
        return l2_normalize(zscore(x))
    return remove_projection(l2_normalize(x), pipeline.c_task)
