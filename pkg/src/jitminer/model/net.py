"""Within-project defect classifier: a small feed-forward network trained
from scratch.

The recipe: seeded 70-30 split, min-max normalization fitted on the
training side, undersampling of the majority class, then full-batch
epochs of backpropagated smooth-L1 gradients under Adam. Everything is
deterministic in (data, config, backend).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import (
    BadShape,
    EmptyDataset,
    InvalidConfig,
    IoError,
    SingleClass,
    TooFewRows,
)
from ..metrics import (
    FEATURE_COLUMNS,
    NUMERIC_FEATURES,
    FeatureMatrix,
    apply_min_max,
)
from ._backend import BACKEND, kernels

NORM_FIT_MODES = ("train", "full", "none")


@dataclass
class NetworkParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class TrainConfig:
    epochs: int = 3500
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    smooth_l1_beta: float = 1.0
    split_ratio: float = 0.7
    seed: int = 42
    feature_subset: tuple[str, ...] | None = None
    hidden_width: int = 32
    weight_layers: int = 9
    norm_fit: str = "train"
    threshold: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise InvalidConfig("split_ratio must be in (0, 1)")
        if self.learning_rate <= 0.0:
            raise InvalidConfig("learning_rate must be positive")
        if self.smooth_l1_beta <= 0.0:
            raise InvalidConfig("smooth_l1_beta must be positive")
        if self.weight_layers < 1:
            raise InvalidConfig("weight_layers must be >= 1")
        if self.hidden_width < 1:
            raise InvalidConfig("hidden_width must be >= 1")
        if self.norm_fit not in NORM_FIT_MODES:
            raise InvalidConfig(f"norm_fit must be one of {NORM_FIT_MODES}")
        if self.feature_subset is not None:
            unknown = [f for f in self.feature_subset if f not in FEATURE_COLUMNS]
            if unknown:
                raise InvalidConfig(f"unknown features: {unknown}")
            if not self.feature_subset:
                raise InvalidConfig("feature_subset must not be empty")

    @property
    def features(self) -> tuple[str, ...]:
        return self.feature_subset if self.feature_subset else FEATURE_COLUMNS


@dataclass
class EvalMetrics:
    recall: float
    precision: float
    f1: float
    mean_loss: float
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn)
    threshold: float = 0.5

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "mean_loss": self.mean_loss,
            "threshold": self.threshold,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        }


@dataclass
class AblationRow:
    label: str
    features: tuple[str, ...]
    recall: float
    mean_loss: float


@dataclass
class AblationReport:
    rows: list[AblationRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "subset": row.label,
                    "features": list(row.features),
                    "recall": row.recall,
                    "mean_loss": row.mean_loss,
                }
                for row in self.rows
            ]
        }


@dataclass
class AdamState:
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in params.weights],
            v_w=[np.zeros_like(w) for w in params.weights],
            m_b=[np.zeros_like(b) for b in params.biases],
            v_b=[np.zeros_like(b) for b in params.biases],
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float = 0.0


@dataclass
class TrainResult:
    """train() output: the fitted parameters and loss history, plus the
    held-out test split (already normalized) and the bounds used."""

    params: NetworkParams
    loss_history: list[float]
    test: FeatureMatrix
    norm_bounds: dict[str, tuple[float, float]]
    features: tuple[str, ...]
    backend: str = BACKEND
    train_size: int = 0
    test_size: int = 0

    def __iter__(self):
        return iter((self.params, self.loss_history))


def matrix_to_arrays(
    matrix: FeatureMatrix, features: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix -> (X, y) float arrays in the given column order."""
    X = np.array(
        [[float(row.value(f)) for f in features] for row in matrix.rows],
        dtype=np.float64,
    ).reshape(len(matrix.rows), len(features))
    y = np.array([1.0 if row.defective else 0.0 for row in matrix.rows])
    return X, y


def _take_rows(matrix: FeatureMatrix, indices: Sequence[int]) -> FeatureMatrix:
    return FeatureMatrix(
        rows=[matrix.rows[i] for i in indices],
        feature_order=matrix.feature_order,
        timestamps=(
            [matrix.timestamps[i] for i in indices] if matrix.timestamps else None
        ),
        norm_bounds=matrix.norm_bounds,
    )


def split_dataset(
    matrix: FeatureMatrix, ratio: float, seed: int
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Seeded uniform shuffle split; train gets round(N * ratio) rows."""
    n = len(matrix.rows)
    positives = sum(1 for r in matrix.rows if r.defective)
    if positives < 2 or n - positives < 2:
        raise TooFewRows(
            f"need at least 2 rows of each class, got {positives} defective"
            f" of {n}"
        )
    n_train = int(math.floor(n * ratio + 0.5))
    if n_train < 1 or n_train >= n:
        raise TooFewRows(f"ratio {ratio} leaves an empty partition for {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    return _take_rows(matrix, perm[:n_train]), _take_rows(matrix, perm[n_train:])


def undersample(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Downsample the majority class (without replacement) to balance."""
    pos = [i for i, r in enumerate(matrix.rows) if r.defective]
    neg = [i for i, r in enumerate(matrix.rows) if not r.defective]
    if not pos or not neg:
        raise SingleClass("undersampling needs both classes present")
    majority, minority = (pos, neg) if len(pos) > len(neg) else (neg, pos)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(majority), size=len(minority), replace=False)
    keep = sorted(minority + [majority[i] for i in chosen])
    return _take_rows(matrix, keep)


def default_layer_sizes(
    n_features: int, hidden_width: int = 32, weight_layers: int = 9
) -> tuple[int, ...]:
    """Width chain for the stated depth: weight_layers matrices total,
    ReLU hidden layers of hidden_width, one sigmoid output unit."""
    return (n_features,) + (hidden_width,) * (weight_layers - 1) + (1,)


def init_network(layer_sizes: Sequence[int], seed: int) -> NetworkParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise BadShape("need at least input and output widths")
    if any(s < 1 for s in sizes):
        raise BadShape(f"layer widths must be positive: {sizes}")
    if sizes[-1] != 1:
        raise BadShape(f"output width must be 1, got {sizes[-1]}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(layer_sizes=sizes, weights=weights, biases=biases)


def forward(params: NetworkParams, x) -> float | np.ndarray:
    """Predicted defect probability; accepts one row or a batch."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != params.layer_sizes[0]:
        raise BadShape(
            f"input width {arr.shape[-1]} does not match {params.layer_sizes[0]}"
        )
    probs = kernels.forward_batch(params.weights, params.biases, arr)
    return float(probs[0]) if single else probs


def smooth_l1_loss(pred, target, beta: float = 1.0) -> float:
    """Mean smooth-L1: quadratic inside the beta band, linear outside."""
    if beta <= 0:
        raise InvalidConfig("beta must be positive")
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    ad = np.abs(d)
    per_element = np.where(ad < beta, 0.5 * d * d / beta, ad - 0.5 * beta)
    return float(np.mean(per_element))


def gradients(params: NetworkParams, X, y, beta: float = 1.0) -> Gradients:
    """Exact gradients of the mean smooth-L1 loss for every parameter."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.layer_sizes[0]:
        raise BadShape(f"batch shape {X.shape} does not match network input")
    if X.shape[0] == 0:
        raise BadShape("batch must be nonempty")
    loss, grad_w, grad_b = kernels.loss_and_grads(
        params.weights, params.biases, X, y, beta
    )
    return Gradients(weights=grad_w, biases=grad_b, loss=loss)


def adam_step(
    params: NetworkParams,
    state: AdamState,
    grads: Gradients,
    config: TrainConfig,
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update, in place; step count advances."""
    if len(grads.weights) != len(params.weights):
        raise BadShape("gradient set does not match parameter layout")
    state.step += 1
    for i in range(len(params.weights)):
        if grads.weights[i].shape != params.weights[i].shape:
            raise BadShape(f"gradient shape mismatch at layer {i}")
        kernels.adam_update(
            params.weights[i], grads.weights[i], state.m_w[i], state.v_w[i],
            state.step, config.learning_rate, config.adam_beta1,
            config.adam_beta2, config.adam_epsilon,
        )
        kernels.adam_update(
            params.biases[i], grads.biases[i], state.m_b[i], state.v_b[i],
            state.step, config.learning_rate, config.adam_beta1,
            config.adam_beta2, config.adam_epsilon,
        )
    return params, state


def train(matrix: FeatureMatrix, config: TrainConfig | None = None) -> TrainResult:
    """Full recipe: split, normalize, undersample, train to `epochs`.

    Normalization bounds are fitted per config.norm_fit ("train" by
    default, "full" to fit on everything, "none" when the caller already
    normalized) and replayed onto the test split. Derived seeds: split
    uses seed, undersampling seed+1, initialization seed+2.
    """
    config = config or TrainConfig()
    features = config.features
    train_part, test_part = split_dataset(matrix, config.split_ratio, config.seed)

    norm_columns = tuple(f for f in features if f in NUMERIC_FEATURES)
    if config.norm_fit == "none":
        bounds = {}
    else:
        source = matrix if config.norm_fit == "full" else train_part
        bounds = {}
        for name in norm_columns:
            values = source.column(name)
            bounds[name] = (min(values), max(values))
    if bounds:
        train_part = apply_min_max(train_part, bounds)
        test_part = apply_min_max(test_part, bounds)

    balanced = undersample(train_part, config.seed + 1)
    X, y = matrix_to_arrays(balanced, features)
    sizes = default_layer_sizes(
        len(features), config.hidden_width, config.weight_layers
    )
    params = init_network(sizes, config.seed + 2)
    state = AdamState.for_params(params)
    losses = kernels.train_loop(
        params.weights, params.biases, X, y,
        state.m_w, state.v_w, state.m_b, state.v_b,
        state.step, config.epochs, config.learning_rate,
        config.adam_beta1, config.adam_beta2, config.adam_epsilon,
        config.smooth_l1_beta,
    )
    state.step += config.epochs
    return TrainResult(
        params=params,
        loss_history=[float(v) for v in losses],
        test=test_part,
        norm_bounds=bounds,
        features=features,
        backend=BACKEND,
        train_size=len(balanced.rows),
        test_size=len(test_part.rows),
    )


def evaluate(
    params: NetworkParams,
    X,
    y,
    threshold: float = 0.5,
    beta: float = 1.0,
) -> EvalMetrics:
    """Confusion counts and recall/precision/f1 at the given threshold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyDataset("evaluation set is empty")
    probs = forward(params, X)
    predicted = probs >= threshold
    actual = y >= 0.5
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return EvalMetrics(
        recall=recall,
        precision=precision,
        f1=f1,
        mean_loss=smooth_l1_loss(probs, y, beta),
        confusion=(tp, fp, tn, fn),
        threshold=threshold,
    )


def evaluate_matrix(
    params: NetworkParams,
    matrix: FeatureMatrix,
    features: Sequence[str],
    threshold: float = 0.5,
    beta: float = 1.0,
) -> EvalMetrics:
    X, y = matrix_to_arrays(matrix, features)
    return evaluate(params, X, y, threshold, beta)


def ablate(
    matrix: FeatureMatrix,
    base_features: Sequence[str],
    config: TrainConfig | None = None,
    jobs: int = 1,
) -> AblationReport:
    """Leave-one-out feature ablation plus the full set, one training run
    each with the same seed; rows sorted by recall (descending)."""
    config = config or TrainConfig()
    base = tuple(base_features)
    if len(base) < 2:
        raise InvalidConfig("ablation needs at least 2 features")
    subsets = [("full", base)]
    subsets += [(f"-{f}", tuple(x for x in base if x != f)) for f in base]

    def run(item: tuple[str, tuple[str, ...]]) -> AblationRow:
        label, subset = item
        sub_config = replace(config, feature_subset=subset)
        result = train(matrix, sub_config)
        metrics = evaluate_matrix(
            result.params, result.test, subset, config.threshold,
            config.smooth_l1_beta,
        )
        return AblationRow(
            label=label, features=subset,
            recall=metrics.recall, mean_loss=metrics.mean_loss,
        )

    if jobs > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, subsets))
    else:
        rows = [run(s) for s in subsets]
    rows.sort(key=lambda r: (-r.recall, r.label))
    return AblationReport(rows=rows)


def save_model(
    path: str | Path,
    result: TrainResult,
    config: TrainConfig,
) -> None:
    """Persist a trained model as JSON: layer sizes, row-major weights,
    biases, normalization bounds and a config echo."""
    payload = {
        "layer_sizes": list(result.params.layer_sizes),
        "weights": [w.tolist() for w in result.params.weights],
        "biases": [b.tolist() for b in result.params.biases],
        "features": list(result.features),
        "norm_bounds": {k: list(v) for k, v in result.norm_bounds.items()},
        "backend": result.backend,
        "config": {
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "adam_beta1": config.adam_beta1,
            "adam_beta2": config.adam_beta2,
            "adam_epsilon": config.adam_epsilon,
            "smooth_l1_beta": config.smooth_l1_beta,
            "split_ratio": config.split_ratio,
            "seed": config.seed,
            "hidden_width": config.hidden_width,
            "weight_layers": config.weight_layers,
            "norm_fit": config.norm_fit,
            "threshold": config.threshold,
        },
    }
    try:
        Path(path).write_text(
            json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoError(f"cannot write model to {path}: {exc}") from exc


@dataclass
class LoadedModel:
    params: NetworkParams
    features: tuple[str, ...]
    norm_bounds: dict[str, tuple[float, float]]
    threshold: float
    config: dict


def load_model(path: str | Path) -> LoadedModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read model from {path}: {exc}") from exc
    params = NetworkParams(
        layer_sizes=tuple(payload["layer_sizes"]),
        weights=[np.asarray(w, dtype=np.float64) for w in payload["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in payload["biases"]],
    )
    return LoadedModel(
        params=params,
        features=tuple(payload["features"]),
        norm_bounds={k: (v[0], v[1]) for k, v in payload["norm_bounds"].items()},
        threshold=float(payload["config"].get("threshold", 0.5)),
        config=payload.get("config", {}),
    )
