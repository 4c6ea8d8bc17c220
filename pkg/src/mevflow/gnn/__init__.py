"""ArbiNet: a small from-scratch GNN graph classifier."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .kernels import BACKEND
from .layers import KINDS, GnnLayerParams, Topology, layer_forward
from .model import (ArbiNetModel, GraphBatch, init_model, model_forward, predict, predict_proba,
                    prepare, readout_mean)
from .tensor import Tensor
from .train import EpochRecord, TrainConfig, train

__all__ = [
    "BACKEND", "KINDS", "ArbiNetModel", "EpochRecord", "GnnLayerParams", "GraphBatch", "Tensor",
    "TrainConfig", "Topology", "grad_check", "init_model", "layer_forward", "load_checkpoint",
    "model_forward", "predict", "predict_proba", "prepare", "readout_mean", "save_checkpoint", "train",
]
