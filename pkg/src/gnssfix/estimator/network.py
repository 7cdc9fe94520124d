"""Graph network mapping per-measurement features to error estimates.

All tensors are plain numpy arrays and both passes are written out by hand,
so gradients can be checked against finite differences parameter by
parameter.  Architecture: a five-block dense encoder, two neighbourhood
averaging blocks over the epoch graph, a four-block dense head and a final
affine readout.  Every hidden block is affine, batch normalisation, leaky
ReLU, in that order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..errors import IoFailure, MissingFit, ModelMissing, ShapeMismatch
from .features import (
    FEATURE_DIM,
    EpochGraph,
    ScalerParams,
    apply_feature_scaler,
    build_graph,
    extract_features,
    unscale_labels,
)

BN_EPS = 1e-5
AGG_FLOOR = 1e-8  # row-sum floor so a node with no neighbours aggregates zero
DEFAULT_HIDDEN = 64
DEFAULT_LEAKY_SLOPE = 0.01
N_ENCODER = 5
N_SAGE = 2
N_HEAD = 4  # hidden head blocks before the final affine

MODEL_FORMAT = "gnssfix.model/1"


def bn_layer_names() -> list[str]:
    """Names of the normalised blocks, in forward order."""
    names = [f"enc{i}" for i in range(N_ENCODER)]
    names += [f"sage{i}" for i in range(N_SAGE)]
    names += [f"head{i}" for i in range(N_HEAD)]
    return names


def tensor_shapes(in_dim: int, hidden: int) -> dict[str, tuple[int, ...]]:
    """Expected shape of every trainable tensor, keyed by name."""
    shapes: dict[str, tuple[int, ...]] = {}
    d = in_dim
    for i in range(N_ENCODER):
        shapes[f"enc{i}.w"] = (d, hidden)
        shapes[f"enc{i}.b"] = (hidden,)
        shapes[f"enc{i}.gamma"] = (hidden,)
        shapes[f"enc{i}.beta"] = (hidden,)
        d = hidden
    for i in range(N_SAGE):
        shapes[f"sage{i}.self_w"] = (hidden, hidden)
        shapes[f"sage{i}.self_b"] = (hidden,)
        shapes[f"sage{i}.nbr_w"] = (hidden, hidden)
        shapes[f"sage{i}.nbr_b"] = (hidden,)
        shapes[f"sage{i}.gamma"] = (hidden,)
        shapes[f"sage{i}.beta"] = (hidden,)
    for i in range(N_HEAD):
        shapes[f"head{i}.w"] = (hidden, hidden)
        shapes[f"head{i}.b"] = (hidden,)
        shapes[f"head{i}.gamma"] = (hidden,)
        shapes[f"head{i}.beta"] = (hidden,)
    shapes["out.w"] = (hidden, 1)
    shapes["out.b"] = (1,)
    return shapes


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Weights, normalisation state and metadata for one model."""

    in_dim: int
    hidden: int
    leaky_slope: float
    tensors: dict[str, np.ndarray]
    bn_stats: dict[str, np.ndarray]
    scaler: ScalerParams | None = None
    train_regions: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        expected = tensor_shapes(self.in_dim, self.hidden)
        if set(self.tensors) != set(expected):
            raise ShapeMismatch("tensor set does not match the architecture")
        for name, shape in expected.items():
            got = self.tensors[name].shape
            if got != shape:
                raise ShapeMismatch(f"{name}: expected shape {shape}, got {got}")
        stat_names = {f"{ln}.{kind}" for ln in bn_layer_names() for kind in ("mean", "var")}
        if set(self.bn_stats) != stat_names:
            raise ShapeMismatch("normalisation state does not match the architecture")
        for name, arr in self.bn_stats.items():
            if arr.shape != (self.hidden,):
                raise ShapeMismatch(f"{name}: expected shape ({self.hidden},), got {arr.shape}")


def init_params(
    rng: np.random.Generator,
    in_dim: int = FEATURE_DIM,
    hidden: int = DEFAULT_HIDDEN,
    leaky_slope: float = DEFAULT_LEAKY_SLOPE,
) -> ModelParams:
    """Fresh parameters: He-normal weight matrices, zero biases, identity norm."""
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(in_dim, hidden).items():
        if name.endswith("w"):
            tensors[name] = rng.standard_normal(shape) * np.sqrt(2.0 / shape[0])
        elif name.endswith("gamma"):
            tensors[name] = np.ones(shape)
        else:
            tensors[name] = np.zeros(shape)
    bn_stats: dict[str, np.ndarray] = {}
    for layer in bn_layer_names():
        bn_stats[f"{layer}.mean"] = np.zeros(hidden)
        bn_stats[f"{layer}.var"] = np.ones(hidden)
    return ModelParams(in_dim, hidden, leaky_slope, tensors, bn_stats)


def _aggregator(graphs: list[EpochGraph]) -> np.ndarray:
    """Block-diagonal neighbour-averaging matrix over a batch of graphs."""
    sizes = [g.adjacency.shape[0] for g in graphs]
    total = int(sum(sizes))
    P = np.zeros((total, total))
    at = 0
    for g, n in zip(graphs, sizes):
        denom = np.maximum(g.adjacency.sum(axis=1, keepdims=True), AGG_FLOOR)
        P[at : at + n, at : at + n] = g.adjacency / denom
        at += n
    return P


def _bn_act(
    params: ModelParams,
    name: str,
    x_in: np.ndarray,
    z: np.ndarray,
    train: bool,
    cache: dict | None,
) -> np.ndarray:
    if train:
        mean = z.mean(axis=0)
        var = z.var(axis=0)
    else:
        mean = params.bn_stats[f"{name}.mean"]
        var = params.bn_stats[f"{name}.var"]
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (z - mean) * inv
    y = params.tensors[f"{name}.gamma"] * xhat + params.tensors[f"{name}.beta"]
    mask = y > 0.0
    out = np.where(mask, y, params.leaky_slope * y)
    if cache is not None:
        cache[name] = {"x": x_in, "xhat": xhat, "inv": inv, "mask": mask, "mean": mean, "var": var}
    return out


def _dense(params: ModelParams, name: str, x: np.ndarray, train: bool, cache: dict | None) -> np.ndarray:
    t = params.tensors
    z = x @ t[f"{name}.w"] + t[f"{name}.b"]
    return _bn_act(params, name, x, z, train, cache)


def batch_forward(
    params: ModelParams, graphs: list[EpochGraph], train: bool = False
) -> tuple[np.ndarray, dict | None]:
    """Run the network over a batch of graphs stacked into one node set.

    Normalisation pools statistics over all nodes of the batch when ``train``
    is set, and uses the stored running statistics otherwise.  Returns the
    per-node outputs flat over the batch, plus the activation cache in train
    mode (None otherwise).
    """
    if not graphs:
        raise ShapeMismatch("no graphs to run")
    for g in graphs:
        if g.node_features.shape[1] != params.in_dim:
            raise ShapeMismatch(
                f"graph feature dim {g.node_features.shape[1]} does not match model in_dim {params.in_dim}"
            )
    t = params.tensors
    X = np.vstack([g.node_features for g in graphs])
    P = _aggregator(graphs)
    cache: dict | None = {"P": P, "sizes": [len(g.node_features) for g in graphs]} if train else None
    h = X
    for i in range(N_ENCODER):
        h = _dense(params, f"enc{i}", h, train, cache)
    for i in range(N_SAGE):
        name = f"sage{i}"
        agg = P @ h
        z = h @ t[f"{name}.self_w"] + t[f"{name}.self_b"] + agg @ t[f"{name}.nbr_w"] + t[f"{name}.nbr_b"]
        h_next = _bn_act(params, name, h, z, train, cache)
        if cache is not None:
            cache[name]["agg"] = agg
        h = h_next
    for i in range(N_HEAD):
        h = _dense(params, f"head{i}", h, train, cache)
    out = (h @ t["out.w"] + t["out.b"]).ravel()
    if cache is not None:
        cache["out_x"] = h
    return out, cache


def forward(params: ModelParams, graph: EpochGraph, mode: str = "infer"):
    """Scaled per-node predictions for one graph.

    ``mode="train"`` uses batch statistics and returns (outputs, cache);
    ``mode="infer"`` uses running statistics and returns the outputs alone.
    """
    if mode not in ("infer", "train"):
        raise ValueError(f"unknown mode {mode!r}")
    out, cache = batch_forward(params, [graph], train=mode == "train")
    if mode == "train":
        return out, cache
    return out


def _bn_act_backward(params: ModelParams, name: str, cache: dict, d_out: np.ndarray, grads: dict) -> np.ndarray:
    entry = cache[name]
    dy = d_out * np.where(entry["mask"], 1.0, params.leaky_slope)
    xhat = entry["xhat"]
    grads[f"{name}.gamma"] = (dy * xhat).sum(axis=0)
    grads[f"{name}.beta"] = dy.sum(axis=0)
    dxhat = dy * params.tensors[f"{name}.gamma"]
    # batch-statistics normalisation couples every row, hence the two means
    return entry["inv"] * (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0))


def batch_backward(params: ModelParams, cache: dict, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of the loss w.r.t. every tensor, given d loss / d output."""
    t = params.tensors
    grads: dict[str, np.ndarray] = {}
    d = np.asarray(d_out, dtype=float).reshape(-1, 1)
    x = cache["out_x"]
    grads["out.w"] = x.T @ d
    grads["out.b"] = d.sum(axis=0)
    dh = d @ t["out.w"].T
    for i in reversed(range(N_HEAD)):
        name = f"head{i}"
        dz = _bn_act_backward(params, name, cache, dh, grads)
        grads[f"{name}.w"] = cache[name]["x"].T @ dz
        grads[f"{name}.b"] = dz.sum(axis=0)
        dh = dz @ t[f"{name}.w"].T
    P = cache["P"]
    for i in reversed(range(N_SAGE)):
        name = f"sage{i}"
        dz = _bn_act_backward(params, name, cache, dh, grads)
        grads[f"{name}.self_w"] = cache[name]["x"].T @ dz
        grads[f"{name}.self_b"] = dz.sum(axis=0)
        grads[f"{name}.nbr_w"] = cache[name]["agg"].T @ dz
        grads[f"{name}.nbr_b"] = dz.sum(axis=0)
        dh = dz @ t[f"{name}.self_w"].T + P.T @ (dz @ t[f"{name}.nbr_w"].T)
    for i in reversed(range(N_ENCODER)):
        name = f"enc{i}"
        dz = _bn_act_backward(params, name, cache, dh, grads)
        grads[f"{name}.w"] = cache[name]["x"].T @ dz
        grads[f"{name}.b"] = dz.sum(axis=0)
        dh = dz @ t[f"{name}.w"].T
    return grads


def update_running_stats(params: ModelParams, cache: dict, momentum: float) -> None:
    """Fold one batch's normalisation statistics into the running state."""
    for name in bn_layer_names():
        entry = cache[name]
        for kind in ("mean", "var"):
            key = f"{name}.{kind}"
            params.bn_stats[key] = (1.0 - momentum) * params.bn_stats[key] + momentum * entry[kind]


def predict_errors(params: ModelParams, epoch) -> np.ndarray:
    """Estimated pseudo-range error, in metres, for every measurement."""
    if params.scaler is None:
        raise MissingFit("model carries no feature scaler; train it first")
    feats = extract_features(epoch)
    graph = build_graph(epoch, apply_feature_scaler(params.scaler, feats))
    out = forward(params, graph, mode="infer")
    return unscale_labels(params.scaler, out)


def save_model(params: ModelParams, path: str) -> None:
    """Write the full model, scaler and provenance to a JSON file."""
    scaler = params.scaler
    payload = {
        "format": MODEL_FORMAT,
        "in_dim": params.in_dim,
        "hidden": params.hidden,
        "leaky_slope": params.leaky_slope,
        "train_regions": list(params.train_regions),
        "tensors": {k: v.tolist() for k, v in params.tensors.items()},
        "bn_stats": {k: v.tolist() for k, v in params.bn_stats.items()},
        "scaler": None
        if scaler is None
        else {
            "feature_mean": scaler.feature_mean.tolist(),
            "feature_std": scaler.feature_std.tolist(),
            "label_mean": scaler.label_mean,
            "label_std": scaler.label_std,
        },
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write model file {path}: {exc}") from exc


def load_model(path: str) -> ModelParams:
    """Read a model file back; shape mismatches against the declared dims fail."""
    if not os.path.exists(path):
        raise ModelMissing(f"no model file at {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"unreadable model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise IoFailure(f"{path} is not a recognised model file")
    try:
        in_dim = int(payload["in_dim"])
        hidden = int(payload["hidden"])
        slope = float(payload["leaky_slope"])
        tensors = {k: np.asarray(v, dtype=float) for k, v in payload["tensors"].items()}
        bn_stats = {k: np.asarray(v, dtype=float) for k, v in payload["bn_stats"].items()}
        regions = tuple(str(r) for r in payload.get("train_regions", []))
        raw = payload.get("scaler")
        scaler = None
        if raw is not None:
            scaler = ScalerParams(
                feature_mean=np.asarray(raw["feature_mean"], dtype=float),
                feature_std=np.asarray(raw["feature_std"], dtype=float),
                label_mean=float(raw["label_mean"]),
                label_std=float(raw["label_std"]),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"malformed model file {path}: {exc}") from exc
    return ModelParams(in_dim, hidden, slope, tensors, bn_stats, scaler, regions)
