"""From-scratch 0-hop MLP and mean-aggregation GNN edge models."""

from .gnn import GraphOperator, gnn_backward, gnn_forward, gnn_scores, propagate
from .mlp import mlp_backward, mlp_forward, mlp_scores
from .nn import Adam, auto_pos_weight, init_params, mse, sigmoid, weighted_bce
from .serialize import dumps_model, load_model, loads_model, save_model
from .spec import (
    Family,
    Head,
    Loss,
    ModelSpec,
    TrainingConfig,
    gnn_param_count,
    match_capacity,
    mlp_param_count,
)
from .training import (
    GNNEdgeModel,
    MLPEdgeModel,
    TrainedModel,
    mean_cosine_distance,
    node_embeddings,
    predict_scores,
    train,
    val_metric,
)

__all__ = [
    "Adam",
    "Family",
    "GNNEdgeModel",
    "GraphOperator",
    "Head",
    "Loss",
    "MLPEdgeModel",
    "ModelSpec",
    "TrainedModel",
    "TrainingConfig",
    "auto_pos_weight",
    "dumps_model",
    "gnn_backward",
    "gnn_forward",
    "gnn_param_count",
    "gnn_scores",
    "init_params",
    "load_model",
    "loads_model",
    "match_capacity",
    "mean_cosine_distance",
    "mlp_backward",
    "mlp_forward",
    "mlp_param_count",
    "mlp_scores",
    "mse",
    "node_embeddings",
    "predict_scores",
    "propagate",
    "save_model",
    "sigmoid",
    "train",
    "val_metric",
    "weighted_bce",
]
