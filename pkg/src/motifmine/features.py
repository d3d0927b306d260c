"""Frozen-model graph embeddings and the top-k score ablation harness.

A graph embedding is the concatenation over contraction layers of the mean
embedding of selected coarse nodes: either the top-k by contraction score or
a random k (the control), with all nodes when k is unset. The ablation trains
a logistic-regression probe on motif-present vs motif-absent labels and
reports cross-validated accuracy per (k, selection mode).
"""
from __future__ import annotations

import csv

import numpy as np

from . import nn
from .graphs import DatasetBundle, Graph
from .miner import CoarseLayer, MinerModel, forward_pass, run_forward_passes


def _select_nodes(layer: CoarseLayer, top_k: int | None, selection: str,
                  rng: np.random.Generator | None) -> np.ndarray:
    n = layer.graph.num_nodes
    if top_k is None or top_k >= n:
        return np.arange(n)
    if selection == "top":
        # Stable sort keeps ties in ascending node order.
        return np.argsort(-layer.scores, kind="stable")[:top_k]
    if selection == "random":
        if rng is None:
            raise ValueError("random selection needs an rng")
        return rng.choice(n, size=top_k, replace=False)
    raise ValueError(f"unknown selection {selection!r}")


def embedding_from_layers(layers: list[CoarseLayer], top_k: int | None = None,
                          selection: str = "top",
                          rng: np.random.Generator | None = None) -> np.ndarray:
    """Concatenated per-layer mean embedding of the selected coarse nodes."""
    blocks = [
        layer.embeddings[_select_nodes(layer, top_k, selection, rng)].mean(axis=0)
        for layer in layers
    ]
    return np.concatenate(blocks)


def graph_embedding(model: MinerModel, g: Graph, seed: int = 0,
                    top_k: int | None = None, selection: str = "top") -> np.ndarray:
    """Fixed-length embedding (n_layers * dim) of one graph under a frozen model."""
    layers = forward_pass(model, g, np.random.default_rng([seed, 3, 0]))
    rng = np.random.default_rng([seed, 4, 0]) if selection == "random" else None
    return embedding_from_layers(layers, top_k, selection, rng)


def motif_presence_labels(dataset: DatasetBundle) -> np.ndarray:
    """Binary label per graph: 1 when any motif was planted."""
    return np.array([int(y.any()) for y in dataset.truth])


def _fit_logistic(x_train: np.ndarray, y_train: np.ndarray, seed: int,
                  steps: int = 300, lr: float = 0.05):
    """Single linear layer trained with logistic loss; returns a predict fn."""
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0) + 1e-8
    xs = (x_train - mean) / std
    clf = nn.init_mlp([xs.shape[1], 1], ["identity"], np.random.default_rng([seed, 5]))
    params = clf.params()
    opt = nn.adam_init(params, lr=lr)
    for _ in range(steps):
        logits, tape = nn.forward(clf, xs)
        p = 1.0 / (1.0 + np.exp(-logits[:, 0]))
        upstream = ((p - y_train) / len(y_train))[:, None]
        grads, _ = nn.backward(clf, tape, upstream)
        nn.adam_step(params, grads, opt)

    def predict(x: np.ndarray) -> np.ndarray:
        logits, _ = nn.forward(clf, (x - mean) / std)
        return (logits[:, 0] > 0).astype(int)

    return predict


def ablation_study(model: MinerModel, dataset: DatasetBundle, labels: np.ndarray,
                   k_values, seed: int = 0, folds: int = 5) -> list[dict]:
    """Cross-validated probe accuracy for top-k vs random-k node selection.

    Returns one row per (k, mode, fold); k may be None for all nodes, in which
    case the two modes see identical embeddings.
    """
    labels = np.asarray(labels, dtype=float)
    passes = run_forward_passes(model, dataset.graphs, seed)
    rows: list[dict] = []
    n = len(dataset.graphs)
    fold_ids = np.random.default_rng([seed, 6]).permutation(n) % folds
    for k in k_values:
        for mode in ("top", "random"):
            embeddings = np.stack([
                embedding_from_layers(
                    layers, k, mode,
                    np.random.default_rng([seed, 4, gi]) if mode == "random" else None)
                for gi, layers in enumerate(passes)
            ])
            for fold in range(folds):
                val = fold_ids == fold
                predict = _fit_logistic(embeddings[~val], labels[~val], seed)
                acc = float((predict(embeddings[val]) == labels[val]).mean())
                rows.append({
                    "k": "all" if k is None else k,
                    "mode": mode,
                    "fold": fold,
                    "accuracy": acc,
                })
    return rows


def ablation_to_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "mode", "fold", "accuracy"])
        for row in rows:
            writer.writerow([row["k"], row["mode"], row["fold"], f"{row['accuracy']:.4f}"])
