"""Two-Gaussian toy study of sampling bias near the task centroid.

Each task draws ``k_shot`` support and ``q_query`` query points per class
from N([-a, 0], I) and N([a, 0], I), builds raw Euclidean class means as
prototypes and classifies queries by the nearest prototype. Tasks are then
binned by the mean distance of the two prototypes to the true centroid
(the origin), which exposes how accuracy drops when prototypes land close
to it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import spearmanr

from . import kernels

MIN_BIN_COUNT = 50


@dataclass(frozen=True)
class SimSpec:
    a: float = 1.0
    k_shot: int = 1
    n_tasks: int = 10000
    q_query: int = 50
    bins: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be > 0")
        if self.k_shot < 1 or self.q_query < 1:
            raise ValueError("k_shot and q_query must be >= 1")
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


@dataclass(frozen=True, eq=False)
class BiasCurve:
    """Accuracy statistics per equal-width distance bin.

    Empty bins carry ``nan`` for mean and std.
    """

    bin_centers: np.ndarray
    mean_acc: np.ndarray
    std_acc: np.ndarray
    count: np.ndarray
    spec: SimSpec | None = None

    def eligible(self, min_count: int = MIN_BIN_COUNT) -> np.ndarray:
        """Indices of bins holding at least ``min_count`` tasks."""
        return np.flatnonzero(self.count >= min_count)

    def gap(self, min_count: int = MIN_BIN_COUNT) -> float:
        """Accuracy of the farthest eligible bin minus the nearest one."""
        ok = self.eligible(min_count)
        if ok.size < 2:
            raise ValueError(f"fewer than two bins with >= {min_count} tasks")
        return float(self.mean_acc[ok[-1]] - self.mean_acc[ok[0]])

    def spearman(self, min_count: int = MIN_BIN_COUNT) -> float:
        ok = self.eligible(min_count)
        return float(spearmanr(self.bin_centers[ok], self.mean_acc[ok])[0])

    def quartile_std(self, min_count: int = MIN_BIN_COUNT) -> tuple[float, float]:
        """Mean per-bin std over the nearest and farthest quarter of eligible bins."""
        ok = self.eligible(min_count)
        q = max(1, int(np.ceil(ok.size / 4)))
        return float(self.std_acc[ok[:q]].mean()), float(self.std_acc[ok[-q:]].mean())

    def __eq__(self, other):
        if not isinstance(other, BiasCurve):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
            for f in ("bin_centers", "mean_acc", "std_acc", "count")
        )

    __hash__ = None


def simulate_tasks(spec: SimSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-task (prototype distance to centroid, query accuracy)."""
    rng = np.random.default_rng(spec.seed)
    means = np.array([[-spec.a, 0.0], [spec.a, 0.0]])
    support = rng.standard_normal((spec.n_tasks, 2, spec.k_shot, 2)) + means[:, None, :]
    queries = rng.standard_normal((spec.n_tasks, 2, spec.q_query, 2)) + means[:, None, :]
    protos = np.ascontiguousarray(support.mean(axis=2))
    dist = np.linalg.norm(protos, axis=2).mean(axis=1)
    acc = kernels.ncc_accuracy(protos, np.ascontiguousarray(queries))
    return dist, acc


def bin_curve(dist, acc, bins: int) -> tuple:
    lo, hi = float(dist.min()), float(dist.max())
    width = (hi - lo) / bins
    if width > 0:
        idx = np.minimum(((dist - lo) / width).astype(np.int64), bins - 1)
    else:
        idx = np.zeros(dist.size, dtype=np.int64)
    count = np.bincount(idx, minlength=bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.bincount(idx, acc, bins) / count
        sq = np.bincount(idx, acc * acc, bins) / count
    # population std; clip tiny negative round-off
    std = np.sqrt(np.maximum(sq - mean * mean, 0.0))
    std[count == 0] = np.nan
    centers = lo + width * (np.arange(bins) + 0.5)
    return centers, mean, std, count


def run_bias_simulation(spec: SimSpec) -> BiasCurve:
    dist, acc = simulate_tasks(spec)
    centers, mean, std, count = bin_curve(dist, acc, spec.bins)
    return BiasCurve(centers, mean, std, count, spec)


def sweep(template: SimSpec, axis: str, values) -> list[tuple[float, BiasCurve]]:
    """One curve per value of ``axis`` ("k_shot" or "a").

    Value ``j`` runs with seed ``template.seed + j`` so curves are independent.
    """
    if axis not in ("k_shot", "a"):
        raise ValueError(f"axis must be 'k_shot' or 'a', got {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for j, v in enumerate(values):
        spec = replace(template, **{axis: v, "seed": template.seed + j})
        out.append((v, run_bias_simulation(spec)))
    return out
