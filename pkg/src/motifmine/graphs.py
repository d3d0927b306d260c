"""Graph containers, random generators, motif planting, and null models.

Everything here is seed-deterministic: the same seed (or generator state)
produces byte-identical graphs, truth matrices, and serialized bundles.
Graphs are simple and undirected; edges are stored as (u, v) pairs with u < v.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

Edge = tuple[int, int]

MOTIF_TOPOLOGIES = ("barbell", "clique", "star", "wheel", "random")


def as_rng(rng: int | np.random.Generator | list[int]) -> np.random.Generator:
    """Accept an integer seed, a seed sequence list, or a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _norm_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass
class Graph:
    """Simple undirected graph with optional per-node feature rows.

    Invariants: no self-loops, each unordered pair stored once with u < v,
    all endpoints < num_nodes, and features (when present) has one row per
    node. Treated as immutable after construction.
    """

    num_nodes: int
    edges: set[Edge]
    features: np.ndarray | None = None
    _adj: list[list[int]] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.num_nodes}")
            norm.add(_norm_edge(u, v))
        self.edges = norm
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=float)
            if self.features.ndim != 2 or self.features.shape[0] != self.num_nodes:
                raise ValueError("features must have one row per node")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def adjacency(self) -> list[list[int]]:
        """Neighbor lists (sorted), built lazily and cached."""
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
            for u, v in self.edges:
                adj[u].append(v)
                adj[v].append(u)
            for lst in adj:
                lst.sort()
            self._adj = adj
        return self._adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def has_edge(self, u: int, v: int) -> bool:
        return _norm_edge(u, v) in self.edges

    def with_features(self, features: np.ndarray) -> "Graph":
        return Graph(self.num_nodes, set(self.edges), features)


def induced_subgraph(g: Graph, nodes) -> Graph:
    """Induced subgraph on `nodes` (reindexed in ascending node order)."""
    order = sorted(set(int(n) for n in nodes))
    index = {n: i for i, n in enumerate(order)}
    edges = {
        (index[u], index[v])
        for u, v in g.edges
        if u in index and v in index
    }
    feats = g.features[order] if g.features is not None else None
    return Graph(len(order), edges, feats)


def is_connected(g: Graph, nodes=None) -> bool:
    """Connectivity of the whole graph, or of the induced subgraph on `nodes`."""
    if nodes is None:
        nodes = range(g.num_nodes)
    nodes = set(int(n) for n in nodes)
    if not nodes:
        return False
    if len(nodes) == 1:
        return True
    adj = g.adjacency()
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == nodes


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def erdos_renyi(n: int, p: float, rng) -> Graph:
    """G(n, p): each of the n(n-1)/2 pairs is an edge independently w.p. p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    rng = as_rng(rng)
    iu, iv = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < p
    edges = {(int(u), int(v)) for u, v in zip(iu[mask], iv[mask])}
    return Graph(n, edges)


def gen_motif(topology: str, size: int, rng) -> Graph:
    """Build a connected motif graph of the given topology and node count.

    barbell: two cliques of size/2 joined by one bridge edge (even size >= 4).
    star: one hub plus size-1 leaves. wheel: cycle of size-1 plus a hub.
    clique: complete graph. random: ER(p=0.5) resampled until connected.
    """
    if size < 3:
        raise ValueError("motif size must be >= 3")
    rng = as_rng(rng)
    if topology == "clique":
        edges = {(u, v) for u, v in combinations(range(size), 2)}
        return Graph(size, edges)
    if topology == "star":
        return Graph(size, {(0, i) for i in range(1, size)})
    if topology == "wheel":
        if size < 4:
            raise ValueError("wheel needs size >= 4 (cycle of size-1 plus hub)")
        rim = size - 1
        edges = {(i, (i + 1) % rim) for i in range(rim)}
        edges |= {(i, rim) for i in range(rim)}
        return Graph(size, edges)
    if topology == "barbell":
        # Two cliques of size/2 joined by a single bridge; size 4 gives a path.
        if size % 2 != 0 or size < 4:
            raise ValueError("barbell needs even size >= 4")
        half = size // 2
        edges = {(u, v) for u, v in combinations(range(half), 2)}
        edges |= {(u, v) for u, v in combinations(range(half, size), 2)}
        edges.add((half - 1, half))
        return Graph(size, edges)
    if topology == "random":
        for _ in range(1000):
            g = erdos_renyi(size, 0.5, rng)
            if is_connected(g):
                return g
        raise RuntimeError("failed to sample a connected random motif")
    raise ValueError(f"unknown topology {topology!r}")


def _plant(host: Graph, motif: Graph, p_connect: float, rng: np.random.Generator,
           delete_node: int) -> tuple[Graph, np.ndarray]:
    """Replace `delete_node` of the host with the motif; wire cross edges w.p. p_connect.

    Surviving host nodes keep their relative order (indices shift down past the
    deleted node); motif nodes are appended at the end. Returns the new graph
    and the array of motif node indices in it.
    """
    n_host = host.num_nodes
    m = motif.num_nodes
    survivors = [u for u in range(n_host) if u != delete_node]
    new_id = {u: i for i, u in enumerate(survivors)}
    edges = {
        _norm_edge(new_id[u], new_id[v])
        for u, v in host.edges
        if u != delete_node and v != delete_node
    }
    off = len(survivors)
    edges |= {(u + off, v + off) for u, v in motif.edges}
    cross = rng.random((m, len(survivors))) < p_connect
    for mi, hi in zip(*np.nonzero(cross)):
        edges.add(_norm_edge(int(mi) + off, int(hi)))
    g = Graph(off + m, edges)
    return g, np.arange(off, off + m)


def plant_motif(host: Graph, motif: Graph, p_connect: float, rng) -> tuple[Graph, np.ndarray]:
    """Delete one random host node and insert the motif intact in its place.

    Cross edges between each motif node and each surviving host node are
    sampled independently with probability p_connect. Returns the new graph
    and a boolean mask over its nodes marking exactly the motif nodes.
    """
    if host.num_nodes < 1:
        raise ValueError("host must have at least one node")
    if not 0.0 <= p_connect <= 1.0:
        raise ValueError("p_connect must be in [0, 1]")
    rng = as_rng(rng)
    delete_node = int(rng.integers(host.num_nodes))
    g, motif_idx = _plant(host, motif, p_connect, rng, delete_node)
    mask = np.zeros(g.num_nodes, dtype=bool)
    mask[motif_idx] = True
    return g, mask


def distort(g: Graph, mask, eps: float, rng) -> Graph:
    """Rewire each edge inside `mask` independently with probability eps.

    A distorted edge is deleted and replaced by a uniformly sampled pair of
    mask nodes that is currently absent (the just-deleted slot is not a
    candidate). When no absent pair exists the deletion stands, so saturated
    subgraphs (cliques) lose edges instead of staying fixed; a motif survives
    intact with probability (1-eps)^(#internal edges).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    rng = as_rng(rng)
    mask_nodes = [i for i, flag in enumerate(np.asarray(mask, dtype=bool)) if flag]
    if not mask_nodes:
        raise ValueError("mask must be nonempty")
    mask_set = set(mask_nodes)
    internal = sorted(e for e in g.edges if e[0] in mask_set and e[1] in mask_set)
    all_pairs = [(u, v) for u, v in combinations(mask_nodes, 2)]
    current = set(g.edges)
    for e in internal:
        if rng.random() >= eps:
            continue
        current.remove(e)
        absent = [p for p in all_pairs if p not in current and p != e]
        if absent:
            current.add(absent[int(rng.integers(len(absent)))])
    return Graph(g.num_nodes, current, g.features)


def rewire_null(g: Graph, n_swaps: int, rng) -> Graph:
    """Degree-preserving randomization via attempted double-edge swaps.

    Each attempt picks two stored edges (a,b), (c,d) and proposes
    (a,d), (c,b); swaps creating self-loops or duplicate edges are rejected.
    Node count and every node degree are preserved exactly.
    """
    if g.num_edges < 2:
        raise ValueError("need at least 2 edges to swap")
    rng = as_rng(rng)
    edges = g.sorted_edges()
    eset = set(edges)
    for _ in range(n_swaps):
        i, j = rng.integers(0, len(edges), size=2)
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j]
        if a == d or c == b:
            continue
        new1 = _norm_edge(a, d)
        new2 = _norm_edge(c, b)
        if new1 == new2 or new1 in eset or new2 in eset:
            continue
        eset.remove(edges[i])
        eset.remove(edges[j])
        eset.add(new1)
        eset.add(new2)
        edges[i] = new1
        edges[j] = new2
    return Graph(g.num_nodes, eset)


# ---------------------------------------------------------------------------
# Dataset bundles
# ---------------------------------------------------------------------------


@dataclass
class MotifSpec:
    """Parameters of a planted-motif dataset."""

    topology: str
    size: int
    count: int = 1
    concentration: float = 1.0
    distortion: float = 0.0

    def __post_init__(self) -> None:
        if self.topology not in MOTIF_TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.size < 3:
            raise ValueError("motif size must be >= 3")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0.0 <= self.concentration <= 1.0:
            raise ValueError("concentration must be in [0, 1]")
        if not 0.0 <= self.distortion <= 1.0:
            raise ValueError("distortion must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "topology": self.topology,
            "size": self.size,
            "count": self.count,
            "concentration": self.concentration,
            "distortion": self.distortion,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MotifSpec":
        return cls(d["topology"], d["size"], d["count"], d["concentration"], d["distortion"])


@dataclass
class DatasetBundle:
    """Graphs with ground-truth motif assignments and rewired null twins."""

    graphs: list[Graph]
    truth: list[np.ndarray]
    nulls: list[Graph]
    spec: MotifSpec
    seed: int

    def __post_init__(self) -> None:
        if not (len(self.graphs) == len(self.truth) == len(self.nulls)):
            raise ValueError("graphs, truth, nulls must have equal length")
        for g, y, null in zip(self.graphs, self.truth, self.nulls):
            if y.shape != (g.num_nodes, self.spec.count):
                raise ValueError("truth matrix shape mismatch")
            if null.num_nodes != g.num_nodes:
                raise ValueError("null twin node count mismatch")

    def __len__(self) -> int:
        return len(self.graphs)


HOST_EDGE_P = 0.1
NULL_SWAPS_PER_EDGE = 10


def _build_one(spec: MotifSpec, seed_seq: list[int]) -> tuple[Graph, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    host_n = 2 * spec.size * spec.count
    g = erdos_renyi(host_n, HOST_EDGE_P, rng)
    motifs = [gen_motif(spec.topology, spec.size, rng) for _ in range(spec.count)]
    plant_flags = rng.random(spec.count) < spec.concentration
    host_alive = list(range(host_n))
    cols: dict[int, np.ndarray] = {}
    for k in range(spec.count):
        if not plant_flags[k]:
            continue
        delete_node = host_alive[int(rng.integers(len(host_alive)))]
        g, motif_idx = _plant(g, motifs[k], HOST_EDGE_P, rng, delete_node)
        host_alive = [u - (u > delete_node) for u in host_alive if u != delete_node]
        for kk in cols:
            cols[kk] = cols[kk] - (cols[kk] > delete_node)
        cols[k] = motif_idx
    for k in sorted(cols):
        if spec.distortion > 0.0:
            mask = np.zeros(g.num_nodes, dtype=bool)
            mask[cols[k]] = True
            g = distort(g, mask, spec.distortion, rng)
    truth = np.zeros((g.num_nodes, spec.count), dtype=int)
    for k, idx in cols.items():
        truth[idx, k] = 1
    return g, truth


def build_dataset(spec: MotifSpec, n_graphs: int, seed: int, jobs: int = 1) -> DatasetBundle:
    """Generate a planted-motif dataset with degree-preserving null twins.

    Each graph uses an independent RNG stream derived from (seed, index), so
    the result does not depend on generation order or parallel width.
    """
    if n_graphs < 1:
        raise ValueError("n_graphs must be >= 1")
    indices = range(n_graphs)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            built = list(pool.map(_build_graph_task, [(spec, seed, i) for i in indices]))
    else:
        built = [_build_graph_task((spec, seed, i)) for i in indices]
    graphs = [g for g, _, _ in built]
    truth = [y for _, y, _ in built]
    nulls = [null for _, _, null in built]
    return DatasetBundle(graphs, truth, nulls, spec, seed)


def _build_graph_task(args: tuple[MotifSpec, int, int]) -> tuple[Graph, np.ndarray, Graph]:
    spec, seed, i = args
    g, truth = _build_one(spec, [seed, i])
    if g.num_edges >= 2:
        null = rewire_null(g, NULL_SWAPS_PER_EDGE * g.num_edges, np.random.default_rng([seed, i, 1]))
    else:
        null = Graph(g.num_nodes, set(g.edges))
    return g, truth, null


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _graph_obj(g: Graph) -> dict:
    return {"n": g.num_nodes, "edges": [[u, v] for u, v in g.sorted_edges()]}


def _graph_from_obj(obj: dict) -> Graph:
    return Graph(obj["n"], {(u, v) for u, v in obj["edges"]})


def dataset_to_json(bundle: DatasetBundle) -> str:
    """Canonical JSON for a bundle: sorted keys, compact separators, u < v edges."""
    obj = {
        "spec": bundle.spec.to_dict(),
        "seed": bundle.seed,
        "graphs": [_graph_obj(g) for g in bundle.graphs],
        "truth": [y.astype(int).flatten().tolist() for y in bundle.truth],
        "nulls": [_graph_obj(g) for g in bundle.nulls],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def dataset_from_json(text: str) -> DatasetBundle:
    obj = json.loads(text)
    spec = MotifSpec.from_dict(obj["spec"])
    graphs = [_graph_from_obj(o) for o in obj["graphs"]]
    truth = [
        np.array(t, dtype=int).reshape(g.num_nodes, spec.count)
        for t, g in zip(obj["truth"], graphs)
    ]
    nulls = [_graph_from_obj(o) for o in obj["nulls"]]
    return DatasetBundle(graphs, truth, nulls, spec, obj["seed"])


def save_dataset(bundle: DatasetBundle, path) -> None:
    with open(path, "w") as f:
        f.write(dataset_to_json(bundle))


def load_dataset(path) -> DatasetBundle:
    with open(path) as f:
        return dataset_from_json(f.read())
