"""Full-batch training with Adam, weighted losses and early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from threadpoolctl import threadpool_limits

from ..dataset import TRAIN, VAL, TaskDataset
from ..exceptions import Diverged, ShapeMismatch, ZeroVariance
from ..features import node_feature_matrix
from ..metrics import f1_score, r2_score
from ..utils import check_binary, check_matrix, check_vector
from .gnn import GraphOperator, _check as _check_gnn, gnn_backward, gnn_scores, propagate
from .mlp import mlp_backward, mlp_scores
from .nn import Adam, auto_pos_weight, init_params, mse, sigmoid, weighted_bce
from .spec import Family, Head, Loss, ModelSpec, TrainingConfig


@dataclass
class TrainedModel:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    history: list[tuple[int, float, float]] = field(default_factory=list)  # (epoch, train loss, val metric)
    best_epoch: int = 0
    config: TrainingConfig = field(default_factory=TrainingConfig)
    pos_weight: float = 1.0

    @property
    def n_epochs(self) -> int:
        return len(self.history)

    def history_csv(self) -> str:
        lines = ["epoch,train_loss,val_metric"]
        lines += [f"{e},{loss!r},{m!r}" for e, loss, m in self.history]
        return "\n".join(lines) + "\n"


def val_metric(scores, y, regression: bool) -> float:
    """Early-stopping criterion: F1 (at sigmoid 0.5) or R^2 (or -MSE for a
    constant target)."""
    if regression:
        try:
            return r2_score(scores, y)
        except ZeroVariance:
            return -float(np.mean((np.asarray(scores) - y) ** 2))
    return f1_score(scores, y)


def _loss(config, spec, z, y, pos_weight):
    if config.loss is Loss.MSE or spec.head is Head.SCALAR:
        return mse(z, y)
    return weighted_bce(z, y, pos_weight)


def fit_loop(spec, config, forward, backward, y_train, y_val, regression, idx_train=None) -> TrainedModel:
    """Generic loop.

    ``forward(params, train, epoch, cache)`` returns scores for the training
    rows (train=True) or validation rows (train=False); ``backward(params,
    cache, dscores)`` returns gradients.
    """
    params = init_params(spec, config.seed)
    if regression or config.loss is Loss.MSE:
        pos_weight = 1.0
    elif config.balanced_sampling:
        pos_weight = 1.0
    elif config.class_weight == "auto":
        pos_weight = auto_pos_weight(y_train)
    else:
        pos_weight = float(config.class_weight)
    opt = Adam(params, config.lr, weight_decay=config.weight_decay)
    history = []
    best = (-np.inf, 0, {k: v.copy() for k, v in params.items()})
    stale = 0
    with threadpool_limits(limits=1):
        for epoch in range(1, config.max_epochs + 1):
            cache = {}
            z = forward(params, True, epoch, cache)
            loss, dz = _loss(config, spec, z, y_train, pos_weight)
            if not np.isfinite(loss):
                raise Diverged(epoch, loss)
            grads = backward(params, cache, dz)
            params = opt.step(params, grads)
            metric = val_metric(forward(params, False, epoch, None), y_val, regression)
            if not np.isfinite(metric):
                raise Diverged(epoch, metric)
            history.append((epoch, loss, metric))
            if metric > best[0]:
                best = (metric, epoch, {k: v.copy() for k, v in params.items()})
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return TrainedModel(spec, best[2], history, best[1], config, pos_weight)


def _split_indices(dataset, split):
    split = split if split is not None else dataset.split
    if split is None:
        raise ValueError("training needs a split assignment")
    split = np.asarray(split)
    tr = np.flatnonzero(split == TRAIN)
    va = np.flatnonzero(split == VAL)
    if len(tr) == 0 or len(va) == 0:
        raise ValueError("split needs nonempty train and val parts")
    return tr, va


def _resample(idx, y, config):
    if not config.balanced_sampling:
        return idx
    from ..sampling import balanced_indices

    return balanced_indices(idx, y, config.seed)


def train(spec: ModelSpec, dataset: TaskDataset, features, config: TrainingConfig | None = None, split=None,
          labels=None) -> TrainedModel:
    """Train ``spec`` on ``dataset``.

    ``features`` is the edge feature matrix (one row per sample) for MLPs
    and the node feature matrix (rows in ``graph.node_ids`` order) for GNNs.
    ``labels`` overrides ``dataset.labels`` (e.g. standardized targets).
    """
    config = config or TrainingConfig()
    regression = dataset.is_regression
    if regression and config.loss is not Loss.MSE:
        config = config.replace(loss=Loss.MSE)
    if regression and spec.head is not Head.SCALAR:
        spec = spec.replace(head=Head.SCALAR)
    y = check_vector(dataset.labels if labels is None else labels, len(dataset), "labels")
    if not regression:
        check_binary(y)
    tr, va = _split_indices(dataset, split)
    tr = _resample(tr, y, config)
    if spec.family is Family.MLP:
        X = check_matrix(features, spec.in_dim, "edge features")
        if X.shape[0] != len(dataset):
            raise ShapeMismatch("edge features need one row per sample")
        Xtr, Xva = X[tr], X[va]

        def forward(params, is_train, epoch, cache):
            if is_train:
                return mlp_scores(params, spec, Xtr, True, config.seed, epoch, cache)
            return mlp_scores(params, spec, Xva)

        def backward(params, cache, dz):
            return mlp_backward(params, spec, cache, dz)

    else:
        op = GraphOperator(dataset.graph, dataset.message_kinds)
        Xn = _check_gnn(spec, op, features)
        src, dst = op.anchor_index(dataset.anchors)

        def forward(params, is_train, epoch, cache):
            if is_train:
                return gnn_scores(params, spec, op, Xn, src[tr], dst[tr], True, config.seed, epoch, cache, False)
            return gnn_scores(params, spec, op, Xn, src[va], dst[va], validate=False)

        def backward(params, cache, dz):
            return gnn_backward(params, spec, op, cache, dz)

    return fit_loop(spec, config, forward, backward, y[tr], y[va], regression)


def predict_scores(model: TrainedModel, dataset: TaskDataset, features, indices=None) -> np.ndarray:
    idx = np.arange(len(dataset)) if indices is None else np.asarray(indices)
    with threadpool_limits(limits=1):
        if model.spec.family is Family.MLP:
            return mlp_scores(model.params, model.spec, np.asarray(features, dtype=float)[idx])
        op = GraphOperator(dataset.graph, dataset.message_kinds)
        src, dst = op.anchor_index(dataset.anchors)
        return gnn_scores(model.params, model.spec, op, features, src[idx], dst[idx])


def node_embeddings(model: TrainedModel, dataset: TaskDataset, features) -> np.ndarray:
    op = GraphOperator(dataset.graph, dataset.message_kinds)
    with threadpool_limits(limits=1):
        return propagate(model.params, model.spec, op, features)


def mean_cosine_distance(H) -> float:
    """Mean pairwise cosine distance between rows (zero rows excluded)."""
    H = np.asarray(H, dtype=float)
    norms = np.linalg.norm(H, axis=1)
    H = H[norms > 0] / norms[norms > 0, None]
    n = len(H)
    if n < 2:
        return 0.0
    sim = H @ H.T
    off = (sim.sum() - np.trace(sim)) / (n * (n - 1))
    return float(1.0 - off)


# ---------------------------------------------------------------------------
# estimator wrappers


class _EdgeModelBase(BaseEstimator):
    def _spec(self, family, in_dim):
        head = Head.SCALAR if self.task == "regression" else Head.LOGIT
        return ModelSpec(family, self.depth, self.hidden_dim, self.dropout, head, in_dim)

    def _config(self):
        return TrainingConfig(
            lr=self.lr,
            weight_decay=self.weight_decay,
            max_epochs=self.max_epochs,
            patience=self.patience,
            class_weight=self.class_weight,
            seed=self.seed,
            loss=Loss.MSE if self.task == "regression" else Loss.WEIGHTED_BCE,
        )

    def _targets(self, y):
        y = check_vector(y)
        if self.task != "regression":
            check_binary(y)
        return y

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X):
        s = self.decision_function(X)
        if self.task == "regression":
            return s
        return (sigmoid(s) >= 0.5).astype(int)

    def score(self, X, y):
        return val_metric(self.decision_function(X), self._targets(y), self.task == "regression")


class MLPEdgeModel(_EdgeModelBase):
    """0-hop model on edge feature rows (``X``: n x in_dim)."""

    def __init__(self, depth=2, hidden_dim=64, dropout=0.2, task="classification", lr=1e-3, weight_decay=1e-5,
                 max_epochs=200, patience=20, class_weight="auto", seed=0):
        self.depth = depth
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.task = task
        self.lr = lr
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.class_weight = class_weight
        self.seed = seed

    def fit(self, X, y, eval_set=None):
        X = check_matrix(X)
        y = self._targets(y)
        if len(y) != X.shape[0]:
            raise ShapeMismatch("X and y differ in length")
        Xv, yv = (X, y) if eval_set is None else (check_matrix(eval_set[0], X.shape[1]), self._targets(eval_set[1]))
        spec = self._spec(Family.MLP, X.shape[1])
        config = self._config()

        def forward(params, is_train, epoch, cache):
            if is_train:
                return mlp_scores(params, spec, X, True, config.seed, epoch, cache)
            return mlp_scores(params, spec, Xv)

        def backward(params, cache, dz):
            return mlp_backward(params, spec, cache, dz)

        self.model_ = fit_loop(spec, config, forward, backward, y, yv, self.task == "regression")
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        X = check_matrix(X, self.n_features_in_)
        with threadpool_limits(limits=1):
            return mlp_scores(self.model_.params, self.model_.spec, X)


class GNNEdgeModel(_EdgeModelBase):
    """k-layer message passing model; ``X`` is a list of ``(src, dst)`` anchors
    into ``graph``. Node features default to :func:`node_feature_matrix`."""

    def __init__(self, graph=None, kinds=None, node_features=None, depth=2, hidden_dim=64, dropout=0.2,
                 task="classification", lr=1e-3, weight_decay=1e-5, max_epochs=200, patience=20,
                 class_weight="auto", seed=0):
        self.graph = graph
        self.kinds = kinds
        self.node_features = node_features
        self.depth = depth
        self.hidden_dim = hidden_dim
        self.dropout = dropout
        self.task = task
        self.lr = lr
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.class_weight = class_weight
        self.seed = seed

    def _prepare(self):
        if self.graph is None:
            raise ValueError("GNNEdgeModel needs a graph")
        self.op_ = GraphOperator(self.graph, self.kinds)
        nf = node_feature_matrix(self.graph) if self.node_features is None else self.node_features
        self.X_nodes_ = check_matrix(nf, name="node features")

    def fit(self, X, y, eval_set=None):
        self._prepare()
        y = self._targets(y)
        src, dst = self.op_.anchor_index(list(X))
        if len(src) != len(y):
            raise ShapeMismatch("anchors and y differ in length")
        if eval_set is None:
            vs, vd, yv = src, dst, y
        else:
            vs, vd = self.op_.anchor_index(list(eval_set[0]))
            yv = self._targets(eval_set[1])
        spec = self._spec(Family.GNN, self.X_nodes_.shape[1])
        config = self._config()
        op, Xn = self.op_, self.X_nodes_

        def forward(params, is_train, epoch, cache):
            if is_train:
                return gnn_scores(params, spec, op, Xn, src, dst, True, config.seed, epoch, cache, False)
            return gnn_scores(params, spec, op, Xn, vs, vd, validate=False)

        def backward(params, cache, dz):
            return gnn_backward(params, spec, op, cache, dz)

        self.model_ = fit_loop(spec, config, forward, backward, y, yv, self.task == "regression")
        return self

    def decision_function(self, X):
        src, dst = self.op_.anchor_index(list(X))
        with threadpool_limits(limits=1):
            return gnn_scores(self.model_.params, self.model_.spec, self.op_, self.X_nodes_, src, dst)

    def embeddings(self):
        with threadpool_limits(limits=1):
            return propagate(self.model_.params, self.model_.spec, self.op_, self.X_nodes_)
