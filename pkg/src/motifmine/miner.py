"""Stochastic edge-contraction miner with spotlight tracking and two-loss training.

Every contraction layer embeds each edge's joint subgraph, scores it with a
sigmoid head, and merges a random matching of edges where each edge contracts
with probability equal to its score. Merged nodes inherit the joint embedding
and score; spotlights (the original nodes covered by a coarse node) grow by
union, so every spotlight stays connected in the original graph.

Training alternates two signals per minibatch:
  * representation loss: inner products of coarse-node embeddings regress the
    structural similarity of the corresponding spotlights;
  * concentration loss: edge scores are pushed up where the edge embedding is
    dense among data graphs and sparse among degree-preserving null twins,
    measured with a k-NN density estimator.
Gradients for the density term flow only through the scores; the density
itself is treated as a constant within a step.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn

from . import nn
from .graphs import DatasetBundle, Graph, as_rng, induced_subgraph
from .kernel import transport_cost, wl_refine

EXP_CLIP = 30.0       # cap on the concentration exponent; densities can be huge
RADIUS_FLOOR = 1e-12  # degenerate k-NN radius clamp


class TrainingDivergedError(RuntimeError):
    """Raised when a loss becomes non-finite during training."""


# ---------------------------------------------------------------------------
# Configuration and model containers
# ---------------------------------------------------------------------------


@dataclass
class MinerConfig:
    """Architecture plus training hyperparameters; defaults follow the
    synthetic-benchmark setup (4 pooling layers, embedding size 8, beta=lambda=1)."""

    n_layers: int = 4
    dim: int = 8
    d_in: int = 10
    hidden: int = 16
    beta: float = 1.0
    lam: float = 1.0
    k_nn: int = 16
    delta_sign: str = "prose"  # "prose" rewards high data-vs-null density gaps
    dummy: bool = False        # clamp every contraction score to 0.5
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    n_pairs: int = 128
    wl_iters: int = 2
    gamma: float = 0.1
    rep_weight: float = 1.0
    conc_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_layers < 1 or self.dim < 1 or self.d_in < 2:
            raise ValueError("need n_layers >= 1, dim >= 1, d_in >= 2")
        if self.beta < 0 or self.lam < 0:
            raise ValueError("beta and lambda must be >= 0")
        if self.delta_sign not in ("prose", "paper"):
            raise ValueError("delta_sign must be 'prose' or 'paper'")

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode()
        ).hexdigest()[:16]


@dataclass
class MinerModel:
    """Input encoder plus per-layer joint-embedding MLPs and scoring heads."""

    encoder: nn.Mlp
    phis: list[nn.Mlp]
    sigma_heads: list[nn.Mlp]
    config: MinerConfig
    opt_state: nn.AdamState | None = field(default=None, repr=False, compare=False)

    def params(self) -> list[np.ndarray]:
        out = self.encoder.params()
        for phi in self.phis:
            out += phi.params()
        for head in self.sigma_heads:
            out += head.params()
        return out


def init_model(config: MinerConfig) -> MinerModel:
    rng = np.random.default_rng([config.seed, 0])
    encoder = nn.init_mlp([config.d_in, config.hidden, config.dim],
                          ["relu", "identity"], rng)
    phis = [
        nn.init_mlp([config.dim, config.hidden, config.dim], ["relu", "identity"], rng)
        for _ in range(config.n_layers)
    ]
    sigma_heads = [
        nn.init_mlp([config.dim, config.dim, 1], ["relu", "sigmoid"], rng)
        for _ in range(config.n_layers)
    ]
    return MinerModel(encoder, phis, sigma_heads, config)


@dataclass
class CoarseLayer:
    """One contraction level: coarse graph, embeddings, scores, spotlights."""

    graph: Graph
    embeddings: np.ndarray
    scores: np.ndarray
    spotlights: list[frozenset[int]]


# ---------------------------------------------------------------------------
# Featurization and per-edge model evaluation
# ---------------------------------------------------------------------------


def init_features(g: Graph, d_in: int) -> Graph:
    """One-hot degree buckets (clipped to d_in - 1) as initial node features."""
    if d_in < 2:
        raise ValueError("d_in must be >= 2")
    buckets = np.minimum(g.degrees(), d_in - 1)
    x = np.zeros((g.num_nodes, d_in))
    x[np.arange(g.num_nodes), buckets] = 1.0
    return g.with_features(x)


def joint_embed(phi: nn.Mlp, x_u: np.ndarray, x_v: np.ndarray) -> np.ndarray:
    """Joint embedding of an edge: sum-pool the endpoints, then the MLP."""
    z, _ = nn.forward(phi, np.asarray(x_u) + np.asarray(x_v))
    return z


def score_edge(sigma_head: nn.Mlp, z_uv: np.ndarray) -> float:
    """Contraction probability for a joint embedding, in (0, 1)."""
    s, _ = nn.forward(sigma_head, z_uv)
    return float(s[0])


# ---------------------------------------------------------------------------
# Contraction
# ---------------------------------------------------------------------------


def _decide_merges(edges: np.ndarray, scores: np.ndarray, order: np.ndarray,
                   draws: np.ndarray, n_nodes: int) -> np.ndarray:
    """Visit edges in `order`; contract edge e when draws[e] < scores[e] and
    neither endpoint merged earlier this round."""
    used = np.zeros(n_nodes, dtype=bool)
    merge = np.zeros(len(edges), dtype=bool)
    for e in order:
        u, v = edges[e]
        if used[u] or used[v]:
            continue
        if draws[e] < scores[e]:
            merge[e] = True
            used[u] = True
            used[v] = True
    return merge


def _assemble(graph: Graph, embeddings: np.ndarray, scores: np.ndarray,
              spotlights: list[frozenset[int]], edges: np.ndarray,
              z: np.ndarray, s: np.ndarray, merge: np.ndarray):
    """Build the next coarse level from merge decisions.

    Merged pairs become new nodes (numbered by edge index), followed by the
    carried-over nodes in ascending order. Returns the CoarseLayer plus, for
    the backward pass, each new node's origin (edge index or previous node).
    """
    n_prev = graph.num_nodes
    mapping = np.full(n_prev, -1, dtype=int)
    merged_edges = np.nonzero(merge)[0]
    n_next = len(merged_edges) + (n_prev - 2 * len(merged_edges))
    origin_merge = np.full(n_next, -1, dtype=int)
    origin_carry = np.full(n_next, -1, dtype=int)
    nid = 0
    for e in merged_edges:
        u, v = edges[e]
        mapping[u] = nid
        mapping[v] = nid
        origin_merge[nid] = e
        nid += 1
    for u in range(n_prev):
        if mapping[u] == -1:
            mapping[u] = nid
            origin_carry[nid] = u
            nid += 1

    new_edges = set()
    for u, v in graph.edges:
        cu, cv = mapping[u], mapping[v]
        if cu != cv:
            new_edges.add((min(cu, cv), max(cu, cv)))
    dim = z.shape[1] if len(z) else embeddings.shape[1]
    new_emb = np.zeros((n_next, dim))
    new_scores = np.zeros(n_next)
    new_spots: list[frozenset[int]] = [frozenset()] * n_next
    for i in range(n_next):
        if origin_merge[i] >= 0:
            e = origin_merge[i]
            u, v = edges[e]
            new_emb[i] = z[e]
            new_scores[i] = s[e]
            new_spots[i] = spotlights[u] | spotlights[v]
        else:
            u = origin_carry[i]
            new_emb[i] = embeddings[u]
            new_scores[i] = scores[u]
            new_spots[i] = spotlights[u]
    layer = CoarseLayer(Graph(n_next, new_edges), new_emb, new_scores, new_spots)
    return layer, mapping, origin_merge, origin_carry


def contract(graph: Graph, embeddings: np.ndarray, scores: np.ndarray,
             spotlights: list[frozenset[int]], edges,
             edge_embeddings: np.ndarray, edge_scores: np.ndarray, rng) -> CoarseLayer:
    """One stochastic contraction round over precomputed edge embeddings/scores."""
    rng = as_rng(rng)
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if len(edges) != len(edge_scores):
        raise ValueError("need one score per edge")
    order = rng.permutation(len(edges))
    draws = rng.random(len(edges))
    merge = _decide_merges(edges, np.asarray(edge_scores, dtype=float), order,
                           draws, graph.num_nodes)
    layer, _, _, _ = _assemble(graph, embeddings, scores, spotlights, edges,
                               np.asarray(edge_embeddings, dtype=float),
                               np.asarray(edge_scores, dtype=float), merge)
    return layer


# ---------------------------------------------------------------------------
# Forward pass (optionally recording tapes for backprop / replay)
# ---------------------------------------------------------------------------


@dataclass
class LayerTrace:
    edges: np.ndarray            # (E, 2) endpoint ids at the previous level
    phi_tape: list | None
    z: np.ndarray                # (E, dim) joint embeddings
    sigma_tape: list | None
    s: np.ndarray                # (E,) edge scores
    order: np.ndarray
    draws: np.ndarray
    merge: np.ndarray
    origin_merge: np.ndarray
    origin_carry: np.ndarray


@dataclass
class ForwardTrace:
    featurized: Graph
    enc_tape: list
    layers: list[LayerTrace]
    coarse: list[CoarseLayer]


def _forward(model: MinerModel, g: Graph, rng,
             replay: ForwardTrace | None = None) -> ForwardTrace:
    cfg = model.config
    if g.features is None or g.features.shape[1] != cfg.d_in:
        g = init_features(g, cfg.d_in)
    rng = as_rng(rng)
    h, enc_tape = nn.forward(model.encoder, g.features)
    scores = np.full(g.num_nodes, 0.5 if cfg.dummy else 0.0)
    spotlights = [frozenset([u]) for u in range(g.num_nodes)]
    graph = g
    layer_traces: list[LayerTrace] = []
    coarse_list: list[CoarseLayer] = []
    for t in range(cfg.n_layers):
        edges = np.asarray(graph.sorted_edges(), dtype=int).reshape(-1, 2)
        n_edges = len(edges)
        if n_edges > 0:
            xsum = h[edges[:, 0]] + h[edges[:, 1]]
            z, phi_tape = nn.forward(model.phis[t], xsum)
            if cfg.dummy:
                s = np.full(n_edges, 0.5)
                sigma_tape = None
            else:
                s_raw, sigma_tape = nn.forward(model.sigma_heads[t], z)
                s = s_raw[:, 0]
            if replay is not None:
                prev = replay.layers[t]
                order, draws, merge = prev.order, prev.draws, prev.merge
            else:
                order = rng.permutation(n_edges)
                draws = rng.random(n_edges)
                merge = _decide_merges(edges, s, order, draws, graph.num_nodes)
        else:
            z = np.zeros((0, cfg.dim))
            s = np.zeros(0)
            phi_tape = sigma_tape = None
            order = np.zeros(0, dtype=int)
            draws = np.zeros(0)
            merge = np.zeros(0, dtype=bool)
        layer, _, origin_merge, origin_carry = _assemble(
            graph, h, scores, spotlights, edges, z, s, merge)
        layer_traces.append(LayerTrace(edges, phi_tape, z, sigma_tape, s, order,
                                       draws, merge, origin_merge, origin_carry))
        coarse_list.append(layer)
        graph, h, scores, spotlights = (layer.graph, layer.embeddings,
                                        layer.scores, layer.spotlights)
    return ForwardTrace(g, enc_tape, layer_traces, coarse_list)


def forward_pass(model: MinerModel, g: Graph, rng) -> list[CoarseLayer]:
    """Run all contraction layers; returns one CoarseLayer per level."""
    return _forward(model, g, rng).coarse


def run_forward_passes(model: MinerModel, graphs: list[Graph],
                       seed: int) -> list[list[CoarseLayer]]:
    """Seeded forward passes over a dataset (stream derived per graph index)."""
    return [forward_pass(model, g, np.random.default_rng([seed, 3, i]))
            for i, g in enumerate(graphs)]


# ---------------------------------------------------------------------------
# k-NN density estimation
# ---------------------------------------------------------------------------


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2) / gamma_fn(d / 2 + 1))


def knn_density(z: np.ndarray, points: np.ndarray, k: int) -> float:
    """k-NN density estimate (k/N) / (c_d * R_k^d) at a single query point.

    When z coincides with a sample row, one such row is excluded from its own
    neighbor set. A zero k-th neighbor radius is clamped to a small floor
    (with a warning) rather than returning infinity.
    """
    points = np.asarray(points, dtype=float)
    z = np.asarray(z, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    d = points.shape[1]
    dists = np.linalg.norm(points - z, axis=1)
    zero = np.nonzero(dists == 0.0)[0]
    if len(zero) and np.array_equal(points[zero[0]], z):
        dists = np.delete(dists, zero[0])
    if len(dists) <= k - 1 or len(points) <= k:
        raise ValueError("need more sample points than k")
    r_k = float(np.partition(dists, k - 1)[k - 1])
    if r_k < RADIUS_FLOOR:
        warnings.warn("degenerate k-NN radius clamped", RuntimeWarning, stacklevel=2)
        r_k = RADIUS_FLOOR
    n = len(dists)
    return (k / n) / (unit_ball_volume(d) * r_k ** d)


def knn_density_batch(queries: np.ndarray, points: np.ndarray, k: int,
                      exclude_self: bool = False) -> tuple[np.ndarray, int]:
    """Vectorized k-NN densities via a k-d tree; returns (densities, #clamped).

    With exclude_self=True every query is assumed to be one of the sample
    rows, so the k-th neighbor is taken among the remaining N-1 points.
    """
    queries = np.asarray(queries, dtype=float)
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    kk = k + 1 if exclude_self else k
    if len(points) < kk:
        raise ValueError("need more sample points than k")
    dists, _ = cKDTree(points).query(queries, k=kk)
    radius = np.atleast_2d(dists)[:, -1] if kk > 1 else np.atleast_1d(dists)
    clamped = int((radius < RADIUS_FLOOR).sum())
    radius = np.maximum(radius, RADIUS_FLOOR)
    n = len(points) - (1 if exclude_self else 0)
    return (k / n) / (unit_ball_volume(d) * radius ** d), clamped


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def spotlight_similarity(g_a: Graph, spot_a: frozenset[int], g_b: Graph,
                         spot_b: frozenset[int], wl_iters: int, gamma: float,
                         wl_cache: dict | None = None,
                         key_a=None, key_b=None) -> float:
    """Structural similarity of two spotlights via WL + exact transport."""
    def embedding(g, spot, key):
        if wl_cache is not None and key is not None and key in wl_cache:
            return wl_cache[key]
        emb = wl_refine(induced_subgraph(g, spot), wl_iters)
        if wl_cache is not None and key is not None:
            wl_cache[key] = emb
        return emb

    cost = transport_cost(embedding(g_a, spot_a, key_a), embedding(g_b, spot_b, key_b))
    return float(np.exp(-gamma * cost))


def rep_loss(coarse_lists: list[list[CoarseLayer]], originals: list[Graph],
             n_pairs: int, rng, wl_iters: int = 2, gamma: float = 0.1,
             wl_cache: dict | None = None, sim_cache: dict | None = None):
    """Mean squared gap between embedding inner products and spotlight similarity.

    Pairs of coarse nodes are sampled uniformly (with replacement) across the
    batch within a shared layer index. Returns the loss and the gradient with
    respect to each sampled coarse-node embedding, keyed (graph, layer, node).
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = as_rng(rng)
    n_layers = len(coarse_lists[0])
    pools = [
        [(gi, ni) for gi, layers in enumerate(coarse_lists)
         for ni in range(layers[t].graph.num_nodes)]
        for t in range(n_layers)
    ]
    total = 0.0
    node_grads: dict[tuple[int, int, int], np.ndarray] = {}
    for _ in range(n_pairs):
        t = int(rng.integers(n_layers))
        pool = pools[t]
        ga, na = pool[int(rng.integers(len(pool)))]
        gb, nb = pool[int(rng.integers(len(pool)))]
        spot_a = coarse_lists[ga][t].spotlights[na]
        spot_b = coarse_lists[gb][t].spotlights[nb]
        ka, kb = (ga, spot_a), (gb, spot_b)
        cache_key = (ka, kb) if ka <= kb else (kb, ka)
        if sim_cache is not None and cache_key in sim_cache:
            target = sim_cache[cache_key]
        else:
            target = spotlight_similarity(originals[ga], spot_a, originals[gb],
                                          spot_b, wl_iters, gamma,
                                          wl_cache, ka, kb)
            if sim_cache is not None:
                sim_cache[cache_key] = target
        za = coarse_lists[ga][t].embeddings[na]
        zb = coarse_lists[gb][t].embeddings[nb]
        diff = float(za @ zb) - target
        total += diff * diff
        ga_key, gb_key = (ga, t, na), (gb, t, nb)
        node_grads.setdefault(ga_key, np.zeros_like(za))
        node_grads[ga_key] += 2.0 * diff * zb / n_pairs
        node_grads.setdefault(gb_key, np.zeros_like(zb))
        node_grads[gb_key] += 2.0 * diff * za / n_pairs
    return total / n_pairs, node_grads


def conc_loss(scores: np.ndarray, z_data: np.ndarray, z_null: np.ndarray,
              k: int, beta: float, lam: float, delta_sign: str = "prose"):
    """Concentration loss over one population of edge embeddings.

    loss = -sum_i s_i * exp(arg_i) + lam * ||s||^2 with
    arg_i = +beta * (f_data(z_i) - f_null(z_i)) for the prose-consistent sign
    and -beta * (...) for the form as printed. The exponent is clipped to keep
    exp finite; densities are treated as constants, so the returned gradient
    is with respect to the scores only.
    """
    scores = np.asarray(scores, dtype=float)
    if delta_sign not in ("prose", "paper"):
        raise ValueError("delta_sign must be 'prose' or 'paper'")
    if beta == 0.0:
        weight = np.ones_like(scores)
    else:
        f_data, _ = knn_density_batch(z_data, z_data, k, exclude_self=True)
        f_null, _ = knn_density_batch(z_data, z_null, k, exclude_self=False)
        delta = f_data - f_null
        sign = 1.0 if delta_sign == "prose" else -1.0
        weight = np.exp(np.clip(sign * beta * delta, -EXP_CLIP, EXP_CLIP))
    value = float(-(scores * weight).sum() + lam * (scores ** 2).sum())
    grad = -weight + 2.0 * lam * scores
    return value, grad


# ---------------------------------------------------------------------------
# Backward through the contraction hierarchy
# ---------------------------------------------------------------------------


def _zero_grads(model: MinerModel) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in model.params()]


def _accumulate(target: list[np.ndarray], offset: int, grads: list[np.ndarray],
                scale: float) -> None:
    for i, g in enumerate(grads):
        target[offset + i] += scale * g


def backward_trace(model: MinerModel, trace: ForwardTrace,
                   node_grads: dict[tuple[int, int], np.ndarray],
                   score_grads: dict[int, np.ndarray],
                   grads: list[np.ndarray], rep_scale: float = 1.0,
                   conc_scale: float = 1.0) -> None:
    """Accumulate parameter gradients for one graph's forward trace.

    node_grads maps (layer, node) to upstream embedding gradients (from the
    representation loss); score_grads maps layer to per-edge score gradients
    (from the concentration loss, flowing only into the scoring heads).
    """
    cfg = model.config
    n_enc = len(model.encoder.params())
    n_phi = len(model.phis[0].params())
    n_sig = len(model.sigma_heads[0].params())

    buffers: list[np.ndarray] = [
        np.zeros_like(layer.embeddings) for layer in trace.coarse
    ]
    h0 = np.zeros((trace.featurized.num_nodes, cfg.dim))
    for (t, ni), g in node_grads.items():
        buffers[t][ni] += g

    for t in range(cfg.n_layers - 1, -1, -1):
        lt = trace.layers[t]
        upstream = buffers[t]
        prev = buffers[t - 1] if t > 0 else h0
        dz = np.zeros_like(lt.z)
        merged = np.nonzero(lt.origin_merge >= 0)[0]
        if len(merged):
            dz[lt.origin_merge[merged]] += upstream[merged]
        carried = np.nonzero(lt.origin_carry >= 0)[0]
        if len(carried):
            np.add.at(prev, lt.origin_carry[carried], upstream[carried])
        if lt.sigma_tape is not None and t in score_grads:
            ds = score_grads[t]
            sgrads, _ = nn.backward(model.sigma_heads[t], lt.sigma_tape, ds[:, None])
            _accumulate(grads, n_enc + cfg.n_layers * n_phi + t * n_sig,
                        sgrads, conc_scale)
        if lt.phi_tape is not None and np.any(dz):
            pgrads, dxsum = nn.backward(model.phis[t], lt.phi_tape, dz)
            _accumulate(grads, n_enc + t * n_phi, pgrads, rep_scale)
            np.add.at(prev, lt.edges[:, 0], dxsum)
            np.add.at(prev, lt.edges[:, 1], dxsum)
    if np.any(h0):
        egrads, _ = nn.backward(model.encoder, trace.enc_tape, h0)
        _accumulate(grads, 0, egrads, rep_scale)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "l_rep", "l_conc"])
            for row in self.epochs:
                writer.writerow([row["epoch"], f"{row['l_rep']:.6f}", f"{row['l_conc']:.6f}"])


def train(dataset: DatasetBundle, config: MinerConfig,
          model: MinerModel | None = None) -> tuple[MinerModel, TrainHistory]:
    """Optimize embeddings and scoring heads over minibatches of graphs.

    Deterministic given config.seed: batch order, contraction draws, and pair
    sampling all come from streams derived from (seed, epoch, graph index).
    Raises TrainingDivergedError when a loss becomes non-finite.
    """
    cfg = config
    if model is None:
        model = init_model(cfg)
    data_graphs = [init_features(g, cfg.d_in) for g in dataset.graphs]
    null_graphs = [init_features(g, cfg.d_in) for g in dataset.nulls]
    params = model.params()
    opt = nn.adam_init(params, lr=cfg.lr)
    wl_cache: dict = {}
    sim_cache: dict = {}
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch, 0]).permutation(len(data_graphs))
        rep_vals, conc_vals = [], []
        for b_start in range(0, len(order), cfg.batch_size):
            batch = order[b_start:b_start + cfg.batch_size]
            traces = [
                _forward(model, data_graphs[i], np.random.default_rng([cfg.seed, epoch, int(i) + 1, 0]))
                for i in batch
            ]
            null_traces = [
                _forward(model, null_graphs[i], np.random.default_rng([cfg.seed, epoch, int(i) + 1, 1]))
                for i in batch
            ]
            l_rep, l_conc, grads = _batch_grads(
                model, traces, null_traces, [data_graphs[i] for i in batch],
                np.random.default_rng([cfg.seed, epoch, 2, b_start]),
                wl_cache, sim_cache)
            if not np.isfinite(l_rep) or not np.isfinite(l_conc):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: rep={l_rep}, conc={l_conc}")
            nn.adam_step(params, grads, opt)
            rep_vals.append(l_rep)
            conc_vals.append(l_conc)
        history.epochs.append({
            "epoch": epoch,
            "l_rep": float(np.mean(rep_vals)),
            "l_conc": float(np.mean(conc_vals)),
        })
    model.opt_state = opt
    return model, history


def _batch_grads(model: MinerModel, traces: list[ForwardTrace],
                 null_traces: list[ForwardTrace], originals: list[Graph],
                 pair_rng: np.random.Generator, wl_cache: dict, sim_cache: dict):
    cfg = model.config
    grads = _zero_grads(model)

    l_rep = 0.0
    per_graph_nodes: list[dict[tuple[int, int], np.ndarray]] = [dict() for _ in traces]
    if cfg.rep_weight > 0:
        coarse_lists = [tr.coarse for tr in traces]
        l_rep, node_grads = rep_loss(coarse_lists, originals, cfg.n_pairs, pair_rng,
                                     cfg.wl_iters, cfg.gamma, wl_cache, sim_cache)
        for (gi, t, ni), g in node_grads.items():
            per_graph_nodes[gi][(t, ni)] = g

    l_conc = 0.0
    per_graph_scores: list[dict[int, np.ndarray]] = [dict() for _ in traces]
    if cfg.conc_weight > 0 and not cfg.dummy:
        for t in range(cfg.n_layers):
            z_parts = [tr.layers[t].z for tr in traces if len(tr.layers[t].z)]
            zn_parts = [tr.layers[t].z for tr in null_traces if len(tr.layers[t].z)]
            if not z_parts or not zn_parts:
                continue
            z_data = np.vstack(z_parts)
            z_null = np.vstack(zn_parts)
            if len(z_data) <= cfg.k_nn or len(z_null) <= cfg.k_nn:
                continue
            s_all = np.concatenate([tr.layers[t].s for tr in traces if len(tr.layers[t].z)])
            value, ds = conc_loss(s_all, z_data, z_null, cfg.k_nn, cfg.beta,
                                  cfg.lam, cfg.delta_sign)
            l_conc += value
            pos = 0
            for gi, tr in enumerate(traces):
                n_e = len(tr.layers[t].z)
                if n_e:
                    per_graph_scores[gi][t] = ds[pos:pos + n_e]
                    pos += n_e

    for gi, tr in enumerate(traces):
        backward_trace(model, tr, per_graph_nodes[gi], per_graph_scores[gi],
                       grads, rep_scale=cfg.rep_weight, conc_scale=cfg.conc_weight)
    return l_rep, l_conc, grads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_model(model: MinerModel, path) -> None:
    obj = {
        "config": asdict(model.config),
        "config_hash": model.config.hash(),
        "encoder": nn.mlp_to_obj(model.encoder),
        "phis": [nn.mlp_to_obj(m) for m in model.phis],
        "sigma_heads": [nn.mlp_to_obj(m) for m in model.sigma_heads],
        "opt_state": nn.adam_to_obj(model.opt_state) if model.opt_state else None,
    }
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_model(path) -> MinerModel:
    with open(path) as f:
        obj = json.load(f)
    config = MinerConfig(**obj["config"])
    model = MinerModel(
        encoder=nn.mlp_from_obj(obj["encoder"]),
        phis=[nn.mlp_from_obj(o) for o in obj["phis"]],
        sigma_heads=[nn.mlp_from_obj(o) for o in obj["sigma_heads"]],
        config=config,
    )
    if obj.get("opt_state"):
        model.opt_state = nn.adam_from_obj(obj["opt_state"])
    return model
