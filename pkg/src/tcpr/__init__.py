"""Task-centroid projection removal for few-shot evaluation."""

__version__ = "0.1.0"

from .classifiers import ClassifierSpec, PrototypeSet, TrainConfig, fit_cosine_softmax, fit_ncc, predict_cosine
from .episodes import EvalConfig, EvalReport, Episode, ci95, evaluate, run_episode, sample_episode
from .feature_bank import (
    FeatureBank,
    SyntheticBankSpec,
    class_rows,
    generate_synthetic_bank,
    load_bank,
    save_bank,
    skewed_bank_pair,
)
from .kernels import BACKEND
from .simulation import BiasCurve, SimSpec, run_bias_simulation, sweep
from .transforms import (
    CentroidEstimator,
    TransformPipeline,
    apply_transform,
    cosine_similarity,
    estimate_task_centroid,
    l2_normalize,
    remove_projection,
    top_k_neighbors,
)
