"""Defect classifier: preprocessing, network, training and ablation.

The numeric kernels live behind a backend seam: a compiled extension
(built from _fastnet.pyx) when available, numpy fallback otherwise.
`jitminer.model.BACKEND` names the one in use.
"""

from ._backend import BACKEND, available_backends
from .net import (
    AblationReport,
    AblationRow,
    AdamState,
    EvalMetrics,
    Gradients,
    LoadedModel,
    NetworkParams,
    TrainConfig,
    TrainResult,
    ablate,
    adam_step,
    default_layer_sizes,
    evaluate,
    evaluate_matrix,
    forward,
    gradients,
    init_network,
    load_model,
    matrix_to_arrays,
    save_model,
    smooth_l1_loss,
    split_dataset,
    train,
    undersample,
)

__all__ = [
    "BACKEND",
    "available_backends",
    "AblationReport",
    "AblationRow",
    "AdamState",
    "EvalMetrics",
    "Gradients",
    "LoadedModel",
    "NetworkParams",
    "TrainConfig",
    "TrainResult",
    "ablate",
    "adam_step",
    "default_layer_sizes",
    "evaluate",
    "evaluate_matrix",
    "forward",
    "gradients",
    "init_network",
    "load_model",
    "matrix_to_arrays",
    "save_model",
    "smooth_l1_loss",
    "split_dataset",
    "train",
    "undersample",
]
