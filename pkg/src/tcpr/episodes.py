"""N-way K-shot episode sampling, per-episode evaluation and aggregation."""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .classifiers import ClassifierSpec
from .errors import (
    AllEpisodesFailed,
    DegenerateInput,
    InsufficientClasses,
    InsufficientSamples,
    MissingBase,
    TooFewSamples,
)
from .feature_bank import FeatureBank
from .transforms import TransformPipeline, apply_transform

Z95 = 1.96


@dataclass(frozen=True, eq=False)
class Episode:
    """One sampled task. Labels are remapped to 0..n_way-1.

    ``classes[j]`` is the source class of episode label ``j``; the
    ``*_rows`` arrays hold source row indices into the novel bank.
    """

    n_way: int
    k_shot: int
    q_query: int
    classes: np.ndarray
    support_x: np.ndarray
    support_y: np.ndarray
    support_rows: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray
    query_rows: np.ndarray


def episode_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for episode ``index``; independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def sample_episode(novel: FeatureBank, n_way: int, k_shot: int, q_query: int,
                   rng: np.random.Generator) -> Episode:
    if min(n_way, k_shot, q_query) < 1:
        raise ValueError("n_way, k_shot and q_query must all be >= 1")
    if novel.num_classes < n_way:
        raise InsufficientClasses(f"{n_way}-way episodes need {n_way} classes, bank has {novel.num_classes}")
    need = k_shot + q_query
    eligible = [c for c in range(novel.num_classes) if len(novel.class_index[c]) >= need]
    if len(eligible) < n_way:
        raise InsufficientSamples(
            f"only {len(eligible)} classes have >= {need} samples; {n_way} required"
        )
    classes = rng.choice(eligible, size=n_way, replace=False)
    support_rows, query_rows = [], []
    for c in classes:
        rows = rng.choice(novel.class_index[int(c)], size=need, replace=False)
        support_rows.append(rows[:k_shot])
        query_rows.append(rows[k_shot:])
    support_rows = np.concatenate(support_rows)
    query_rows = np.concatenate(query_rows)
    return Episode(
        n_way=n_way, k_shot=k_shot, q_query=q_query,
        classes=classes,
        support_x=novel.features[support_rows],
        support_y=np.repeat(np.arange(n_way), k_shot),
        support_rows=support_rows,
        query_x=novel.features[query_rows],
        query_y=np.repeat(np.arange(n_way), q_query),
        query_rows=query_rows,
    )


def run_episode(ep: Episode, base: FeatureBank | None, pipeline: TransformPipeline,
                classifier: ClassifierSpec) -> float:
    """Fit the transform and classifier on one episode; return query accuracy."""
    fitted = pipeline.fit(ep.support_x, ep.query_x, base)
    support = apply_transform(fitted, ep.support_x)
    query = apply_transform(fitted, ep.query_x)
    protos = classifier.fit(support, ep.support_y, ep.n_way)
    correct = int(np.count_nonzero(protos.predict(query) == ep.query_y))
    return correct / ep.query_y.size


def ci95(accs) -> tuple[float, float]:
    """Mean and 95% half-width ``1.96 * s / sqrt(m)`` using the sample std.

    Raises :class:`TooFewSamples` (carrying the mean) for fewer than two values.
    """
    accs = [float(a) for a in accs]
    if not accs:
        raise TooFewSamples(float("nan"), "no samples")
    # statistics works in exact arithmetic: constant input gives exactly 0
    mean = statistics.fmean(accs)
    if len(accs) < 2:
        raise TooFewSamples(mean)
    return mean, Z95 * statistics.stdev(accs) / math.sqrt(len(accs))


@dataclass(frozen=True)
class EvalConfig:
    n_way: int = 5
    k_shot: int = 1
    q_query: int = 15
    episodes: int = 2000
    pipeline: TransformPipeline = field(default_factory=TransformPipeline)
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)

    def describe(self) -> dict:
        """Flat, ordered echo of every setting that affects results."""
        est = self.pipeline.estimator if self.pipeline.kind == "tcpr" else None
        train = self.classifier.train
        return {
            "transform": self.pipeline.kind,
            "centroid": est.kind if est else "-",
            "k": est.k if est and est.kind == "base-knn" else "-",
            "p": est.p if est and est.kind == "base-knn" else "-",
            "classifier": self.classifier.kind,
            "gamma": train.gamma,
            "lr": train.learning_rate if self.classifier.kind == "cosine" else "-",
            "epochs": train.epochs if self.classifier.kind == "cosine" else "-",
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "q": self.q_query,
            "episodes": self.episodes,
        }


@dataclass(frozen=True)
class EvalReport:
    per_episode_acc: tuple
    episode_ids: tuple
    failed_episodes: int
    mean_acc: float
    ci95_half_width: float
    ci_degenerate: bool
    config: dict
    failures: tuple = ()

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(novel: FeatureBank, base: FeatureBank | None, config: EvalConfig,
             master_seed: int, threads: int | None = None) -> EvalReport:
    """Run ``config.episodes`` episodes and aggregate the successful ones.

    Episode ``i`` draws from :func:`episode_rng` ``(master_seed, i)``, so
    the report does not depend on ``threads``. Episodes whose transform or
    classifier hits a numerical degeneracy are counted in
    ``failed_episodes`` and excluded from the mean.
    """
    if config.episodes < 1:
        raise ValueError("episodes must be >= 1")
    if config.pipeline.needs_base and base is None:
        raise MissingBase(f"transform {config.pipeline.kind} with this estimator needs a base bank")

    def one(i):
        ep = sample_episode(novel, config.n_way, config.k_shot, config.q_query,
                            episode_rng(master_seed, i))
        try:
            return run_episode(ep, base, config.pipeline, config.classifier), None
        except DegenerateInput as exc:
            return None, f"{type(exc).__name__}: {exc}"

    workers = threads or os.cpu_count() or 1
    if workers == 1 or config.episodes == 1:
        results = [one(i) for i in range(config.episodes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(config.episodes)))

    ids = tuple(i for i, (acc, _) in enumerate(results) if acc is not None)
    accs = tuple(results[i][0] for i in ids)
    failures = tuple((i, msg) for i, (acc, msg) in enumerate(results) if acc is None)
    if not accs:
        raise AllEpisodesFailed(f"all {config.episodes} episodes failed; first: {failures[0][1]}")
    try:
        mean, half = ci95(accs)
        degenerate = False
    except TooFewSamples as exc:
        mean, half, degenerate = exc.mean, 0.0, True
    echo = dict(config.describe(), seed=master_seed)
    return EvalReport(accs, ids, len(failures), mean, half, degenerate, echo, failures)
