"""Adam training loop and gradients for the error estimator."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..errors import LengthMismatch, NoLabels
from ..types import Epoch
from .features import (
    apply_feature_scaler,
    apply_label_scaler,
    build_graph,
    extract_features,
    fit_scaler,
    EpochGraph,
)
from .network import (
    DEFAULT_HIDDEN,
    ModelParams,
    batch_backward,
    batch_forward,
    init_params,
    update_running_stats,
)


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser schedule; batch_size counts epochs, not measurements."""

    batch_size: int = 32
    iterations: int = 10_000
    learning_rate: float = 1e-3
    weight_decay: float = 1e-3
    lr_decay: float = 0.8
    lr_decay_every: int = 1500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    leaky_slope: float = 0.01
    bn_momentum: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        for name in (
            "iterations",
            "learning_rate",
            "weight_decay",
            "lr_decay",
            "lr_decay_every",
            "adam_beta1",
            "adam_beta2",
            "adam_eps",
            "leaky_slope",
            "bn_momentum",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def loss_l2(e_hat_scaled: Sequence[np.ndarray], e_scaled: Sequence[np.ndarray]) -> float:
    """Squared error summed over each epoch's nodes, averaged over epochs."""
    if len(e_hat_scaled) != len(e_scaled):
        raise LengthMismatch(f"{len(e_hat_scaled)} prediction groups vs {len(e_scaled)} label groups")
    total = 0.0
    for pred, label in zip(e_hat_scaled, e_scaled):
        pred = np.asarray(pred, dtype=float)
        label = np.asarray(label, dtype=float)
        if pred.shape != label.shape:
            raise LengthMismatch(f"prediction shape {pred.shape} vs label shape {label.shape}")
        total += float(np.sum((pred - label) ** 2))
    return total / len(e_hat_scaled)


def _loss_and_grads(
    params: ModelParams,
    graphs: Sequence[EpochGraph],
    labels_scaled: Sequence[np.ndarray],
    weight_decay: float,
) -> tuple[float, dict[str, np.ndarray], dict]:
    if len(graphs) != len(labels_scaled):
        raise LengthMismatch(f"{len(graphs)} graphs vs {len(labels_scaled)} label groups")
    for g, y in zip(graphs, labels_scaled):
        if g.node_features.shape[0] != len(y):
            raise LengthMismatch(f"{g.node_features.shape[0]} nodes vs {len(y)} labels in one epoch")
    out, cache = batch_forward(params, list(graphs), train=True)
    y_cat = np.concatenate([np.asarray(y, dtype=float) for y in labels_scaled])
    batch = len(graphs)
    diff = out - y_cat
    loss = float(np.sum(diff**2)) / batch
    d_out = 2.0 * diff / batch
    grads = batch_backward(params, cache, d_out)
    if weight_decay != 0.0:
        for name, value in params.tensors.items():
            grads[name] = grads[name].reshape(value.shape) + weight_decay * value
    else:
        for name, value in params.tensors.items():
            grads[name] = grads[name].reshape(value.shape)
    return loss, grads, cache


def compute_gradients(
    params: ModelParams,
    graphs: Sequence[EpochGraph],
    labels_scaled: Sequence[np.ndarray],
    weight_decay: float = 0.0,
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradient of the batch loss for every tensor."""
    _, grads, _ = _loss_and_grads(params, graphs, labels_scaled, weight_decay)
    return grads


def batch_loss(
    params: ModelParams,
    graphs: Sequence[EpochGraph],
    labels_scaled: Sequence[np.ndarray],
) -> float:
    """Train-mode loss of one batch, no gradient; the finite-difference probe."""
    out, _ = batch_forward(params, list(graphs), train=True)
    sizes = [g.node_features.shape[0] for g in graphs]
    split = np.split(out, np.cumsum(sizes)[:-1])
    return loss_l2(split, list(labels_scaled))


def train(
    dataset: Sequence[Epoch],
    config: TrainConfig,
    hidden: int = DEFAULT_HIDDEN,
    loss_sink: list | None = None,
) -> ModelParams:
    """Fit the estimator on every epoch of ``dataset`` that carries labels.

    Deterministic for a fixed seed: initialisation, batch order and update
    arithmetic all come from one seeded generator.  The returned parameters
    embed the feature scaler, the running normalisation statistics and the
    set of regions trained on.  When ``loss_sink`` is given, the pre-update
    batch loss of every iteration is appended to it.
    """
    labelled = [ep for ep in dataset if ep.has_truth_errors()]
    if not labelled:
        raise NoLabels("no epochs with per-measurement truth errors to train on")

    feats_raw = [extract_features(ep) for ep in labelled]
    labels_raw = [np.asarray(ep.truth_errors(), dtype=float) for ep in labelled]
    scaler = fit_scaler(np.vstack(feats_raw), np.concatenate(labels_raw))
    graphs = [build_graph(ep, apply_feature_scaler(scaler, f)) for ep, f in zip(labelled, feats_raw)]
    labels = [apply_label_scaler(scaler, y) for y in labels_raw]

    rng = np.random.default_rng(config.seed)
    params = init_params(
        rng,
        in_dim=feats_raw[0].shape[1],
        hidden=hidden,
        leaky_slope=config.leaky_slope,
    )

    m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    v = {k: np.zeros_like(val) for k, val in params.tensors.items()}
    n_epochs = len(graphs)
    order = rng.permutation(n_epochs)
    pos = 0
    for it in range(config.iterations):
        if pos + config.batch_size > n_epochs:
            order = rng.permutation(n_epochs)
            pos = 0
        idx = order[pos : pos + config.batch_size]
        pos += config.batch_size

        loss, grads, cache = _loss_and_grads(
            params,
            [graphs[i] for i in idx],
            [labels[i] for i in idx],
            config.weight_decay,
        )
        if loss_sink is not None:
            loss_sink.append(loss)
        update_running_stats(params, cache, config.bn_momentum)

        lr = config.learning_rate * config.lr_decay ** (it // config.lr_decay_every)
        step = it + 1
        bias1 = 1.0 - config.adam_beta1**step
        bias2 = 1.0 - config.adam_beta2**step
        for name in params.tensors:
            g = grads[name]
            m[name] = config.adam_beta1 * m[name] + (1.0 - config.adam_beta1) * g
            v[name] = config.adam_beta2 * v[name] + (1.0 - config.adam_beta2) * g**2
            m_hat = m[name] / bias1
            v_hat = v[name] / bias2
            params.tensors[name] = params.tensors[name] - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)

    regions = tuple(sorted({ep.region_id for ep in labelled}))
    return replace(params, scaler=scaler, train_regions=regions)
