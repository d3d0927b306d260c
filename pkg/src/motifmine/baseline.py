"""Exact motif mining: ESU enumeration, canonical labels, concentration filter.

Enumerates all connected induced k-subgraphs (duplicate free), groups them by
isomorphism class via a minimum adjacency-bitstring canonical form, and keeps
classes whose occurrence ratio against the rewired nulls exceeds a threshold.
Distorted motif instances land in different classes by construction, which is
the known failure mode of exact matching.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .graphs import DatasetBundle, Graph


class BudgetExceededError(RuntimeError):
    """Raised when enumeration would exceed the configured subgraph cap."""


def enumerate_connected(g: Graph, k: int) -> list[tuple[int, ...]]:
    """All connected induced k-node subgraphs, each node set exactly once (ESU)."""
    if not 3 <= k <= 6:
        raise ValueError("k must be in [3, 6]")
    adj = [set(nbrs) for nbrs in g.adjacency()]
    results: list[tuple[int, ...]] = []

    def extend(sub: list[int], extension: set[int], root: int) -> None:
        if len(sub) == k:
            results.append(tuple(sorted(sub)))
            return
        ext = sorted(extension)
        remaining = set(extension)
        neighborhood = set().union(*(adj[u] for u in sub)) | set(sub)
        for w in ext:
            remaining.discard(w)
            new_ext = remaining | {
                u for u in adj[w] if u > root and u not in neighborhood
            }
            extend(sub + [w], new_ext, root)

    for v in range(g.num_nodes):
        extend([v], {u for u in adj[v] if u > v}, v)
    return results


def canonical_form(g: Graph, nodes) -> tuple[int, int]:
    """Canonical label (k, bits): minimum adjacency bitstring over all orderings.

    Two node sets share a label iff their induced subgraphs are isomorphic.
    Intended for k <= 6 (brute force over k! orderings).
    """
    nodes = sorted(int(n) for n in nodes)
    k = len(nodes)
    if k > 6:
        raise ValueError("canonical_form is brute force; k must be <= 6")
    present = [
        [g.has_edge(nodes[i], nodes[j]) for j in range(k)] for i in range(k)
    ]
    best = None
    for perm in permutations(range(k)):
        bits = 0
        pos = 0
        for i in range(k):
            for j in range(i + 1, k):
                if present[perm[i]][perm[j]]:
                    bits |= 1 << pos
                pos += 1
        if best is None or bits < best:
            best = bits
    return (k, best)


@dataclass
class MotifClass:
    """One isomorphism class with its occurrence statistics."""

    label: tuple[int, int]
    count_data: int = 0
    count_null: int = 0
    instances: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.count_data / (self.count_null + 1)


def exact_mine(dataset: DatasetBundle, k: int, c: float = 2.0,
               budget: int | None = 5_000_000) -> tuple[list[MotifClass], list[np.ndarray]]:
    """Mine over-represented k-subgraph classes and emit hard assignments.

    Classes with count_data / (count_null + 1) > c are kept, ranked by ratio;
    the top spec.count classes become assignment columns (a node is marked in a
    column when it belongs to any instance of that class in its graph).
    Raises BudgetExceededError when total enumerated subgraphs pass `budget`.
    """
    classes: dict[tuple[int, int], MotifClass] = {}
    enumerated = 0
    # Canonical labels are memoized on the raw (identity-order) bit pattern.
    memo: dict[int, tuple[int, int]] = {}

    def label_of(g: Graph, nodes: tuple[int, ...]) -> tuple[int, int]:
        raw = 0
        pos = 0
        for i in range(k):
            for j in range(i + 1, k):
                if g.has_edge(nodes[i], nodes[j]):
                    raw |= 1 << pos
                pos += 1
        hit = memo.get(raw)
        if hit is None:
            hit = canonical_form(g, nodes)
            memo[raw] = hit
        return hit

    for gid, g in enumerate(dataset.graphs):
        for nodes in enumerate_connected(g, k):
            enumerated += 1
            if budget is not None and enumerated > budget:
                raise BudgetExceededError(f"subgraph budget {budget} exceeded")
            cls = classes.setdefault(label_of(g, nodes), MotifClass(label_of(g, nodes)))
            cls.count_data += 1
            cls.instances.append((gid, nodes))
    for null in dataset.nulls:
        for nodes in enumerate_connected(null, k):
            enumerated += 1
            if budget is not None and enumerated > budget:
                raise BudgetExceededError(f"subgraph budget {budget} exceeded")
            cls = classes.setdefault(label_of(null, nodes), MotifClass(label_of(null, nodes)))
            cls.count_null += 1

    kept = [cls for cls in classes.values() if cls.ratio > c]
    kept.sort(key=lambda cls: (-cls.ratio, cls.label))
    top = kept[: dataset.spec.count]

    assignments = [np.zeros((g.num_nodes, dataset.spec.count), dtype=int)
                   for g in dataset.graphs]
    for col, cls in enumerate(top):
        for gid, nodes in cls.instances:
            assignments[gid][list(nodes), col] = 1
    return kept, assignments


def classes_to_csv(classes: list[MotifClass], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["canonical_label", "k", "count_data", "count_null", "ratio"])
        for cls in classes:
            writer.writerow([cls.label[1], cls.label[0], cls.count_data,
                             cls.count_null, f"{cls.ratio:.6g}"])
