"""Recovery metrics: real-valued Jaccard, permutation-maximized Jaccard,
score-separation AUC, and the fixed-score control pipeline."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import mannwhitneyu


def _as_matrix(y) -> np.ndarray:
    values = getattr(y, "values", y)
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("assignment must be a 2-D matrix")
    return arr


def _column_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    union = np.maximum(a, b).sum()
    if union == 0:
        return 1.0  # empty-set agreement
    return float(np.minimum(a, b).sum() / union)


def jaccard(yhat, y) -> float:
    """Mean per-column real-valued Jaccard; all-zero union columns count 1."""
    yhat = _as_matrix(yhat)
    y = _as_matrix(y)
    if yhat.shape != y.shape:
        raise ValueError(f"shape mismatch {yhat.shape} vs {y.shape}")
    k = y.shape[1]
    if k == 0:
        return 1.0
    return float(np.mean([_column_jaccard(yhat[:, j], y[:, j]) for j in range(k)]))


def _pad_columns(a: np.ndarray, k: int) -> np.ndarray:
    if a.shape[1] == k:
        return a
    return np.hstack([a, np.zeros((a.shape[0], k - a.shape[1]))])


def m_jaccard(yhat, y) -> tuple[float, np.ndarray]:
    """Maximum Jaccard over column permutations of y, solved as an assignment.

    Column counts are equalized by zero-padding the smaller matrix; per-pair
    Jaccards are independent, so the max over permutations is an exact linear
    assignment. Returns (score, permutation) with permutation[j] = the y column
    matched to yhat column j.
    """
    yhat = _as_matrix(yhat)
    y = _as_matrix(y)
    if yhat.shape[0] != y.shape[0]:
        raise ValueError("row counts differ")
    k = max(yhat.shape[1], y.shape[1])
    if k == 0:
        return 1.0, np.zeros(0, dtype=int)
    yhat = _pad_columns(yhat, k)
    y = _pad_columns(y, k)
    pair = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            pair[i, j] = _column_jaccard(yhat[:, i], y[:, j])
    rows, cols = linear_sum_assignment(-pair)
    perm = np.empty(k, dtype=int)
    perm[rows] = cols
    return float(pair[rows, cols].mean()), perm


def rank_auc(positive: np.ndarray, negative: np.ndarray) -> float:
    """P(random positive > random negative), ties counted half (Mann-Whitney U)."""
    positive = np.asarray(positive, dtype=float)
    negative = np.asarray(negative, dtype=float)
    if len(positive) == 0 or len(negative) == 0:
        return float("nan")
    u = mannwhitneyu(positive, negative, alternative="two-sided").statistic
    return float(u / (len(positive) * len(negative)))


def sigma_separation(model, dataset, layer: int, seed: int = 0):
    """Contraction scores of motif-covering vs other coarse nodes, plus AUC.

    A coarse node counts as motif-covering when more than half of its
    spotlight lies inside any single truth column. Forward passes are seeded
    per graph for reproducibility.
    """
    from .miner import run_forward_passes

    passes = run_forward_passes(model, dataset.graphs, seed)
    motif_scores: list[float] = []
    other_scores: list[float] = []
    for layers, truth in zip(passes, dataset.truth):
        coarse = layers[layer - 1]
        col_sets = [set(np.nonzero(truth[:, j])[0]) for j in range(truth.shape[1])]
        for spotlight, score in zip(coarse.spotlights, coarse.scores):
            inside = any(
                len(spotlight & col) > 0.5 * len(spotlight) for col in col_sets if col
            )
            (motif_scores if inside else other_scores).append(float(score))
    motif = np.array(motif_scores)
    other = np.array(other_scores)
    return motif, other, rank_auc(motif, other)


@dataclass
class EvalReport:
    """Per-graph recovery scores plus dataset-level aggregates."""

    per_graph: list[float]
    permutations: list[list[int]]
    config: dict = field(default_factory=dict)
    sigma_auc: float | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_graph))

    @property
    def std(self) -> float:
        return float(np.std(self.per_graph))

    def to_json(self) -> str:
        obj = {
            "config": self.config,
            "mean": self.mean,
            "std": self.std,
            "sigma_auc": self.sigma_auc,
            "per_graph": self.per_graph,
            "permutations": self.permutations,
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"

    def write_csv(self, path, condition: str = "", epsilon: float | None = None,
                  dummy_mean: float | None = None, dummy_std: float | None = None) -> None:
        """One summary row: condition, epsilon, mean, std, dummy mean, dummy std."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["condition", "epsilon", "mean", "std", "dummy_mean", "dummy_std"])
            writer.writerow([
                condition,
                "" if epsilon is None else epsilon,
                f"{self.mean:.4f}",
                f"{self.std:.4f}",
                "" if dummy_mean is None else f"{dummy_mean:.4f}",
                "" if dummy_std is None else f"{dummy_std:.4f}",
            ])


def evaluate_assignments(assignments, truth) -> EvalReport:
    """Score a list of predicted assignment matrices against truth matrices."""
    scores, perms = [], []
    for yhat, y in zip(assignments, truth):
        score, perm = m_jaccard(yhat, y)
        scores.append(score)
        perms.append(perm.tolist())
    return EvalReport(scores, perms)


def dummy_control(dataset, config, table_sizes=(8, 16, 32), layer_indices=(2, 3, 4),
                  r_values=(1, 2), n_repeats: int = 5) -> EvalReport:
    """Train-and-decode with all contraction scores clamped to 0.5.

    Runs the identical pipeline and grid search as a learned model, isolating
    the contribution of learned scoring.
    """
    from dataclasses import replace

    from .decoder import decode_grid_search
    from .miner import run_forward_passes, train

    dummy_cfg = replace(config, dummy=True)
    model, _ = train(dataset, dummy_cfg)
    passes = run_forward_passes(model, dataset.graphs, dummy_cfg.seed)
    best = decode_grid_search(passes, dataset.truth, table_sizes, layer_indices,
                              r_values, n_repeats=n_repeats, seed=dummy_cfg.seed)
    report = evaluate_assignments(best.assignments, dataset.truth)
    report.config = dict(best.config, dummy=True)
    _, _, auc = sigma_separation(model, dataset, best.config["layer"], seed=dummy_cfg.seed)
    report.sigma_auc = auc
    return report
