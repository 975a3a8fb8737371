"""Optimum-path forests by seed competition with the max-arc path value.

The engine minimizes, for every node, the maximum arc weight along a path
from the seed set (bottleneck/minimax cost), recording predecessor, root
and propagated label along one optimum path. Weights are non-negative
integers; graphs whose maximum weight fits the bucket budget run on a
Dial-style FIFO bucket queue (linear time), larger weights fall back to a
binary heap with identical tie-breaking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import EmptySeedSet, SeedOutOfRange

IFT_INF = np.int64(2**62)
BUCKET_BUDGET = 1023
QUANT_LEVELS = 1023


def quantize_weights(weights: np.ndarray, levels: int = QUANT_LEVELS) -> np.ndarray:
    """Scale real arc weights linearly onto integers 0..levels.

    Scaling uses the array's own maximum, so multiplying all weights by a
    positive constant leaves the quantized graph unchanged. Rounds half up.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        return np.zeros(0, dtype=np.int64)
    if w.min() < 0:
        raise ValueError("arc weights must be non-negative")
    wmax = w.max()
    if wmax <= 0:
        return np.zeros(w.shape, dtype=np.int64)
    return np.floor(w * (levels / wmax) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class GenericGraph:
    """Symmetric weighted graph in CSR form with integer weights."""

    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.indptr.shape != (self.node_count + 1,):
            raise ValueError("indptr must have node_count + 1 entries")
        if self.indices.shape != self.weights.shape:
            raise ValueError("indices and weights must align")
        if self.weights.size and self.weights.min() < 0:
            raise ValueError("weights must be non-negative")

    @property
    def arc_count(self) -> int:
        return int(self.indices.size)

    @property
    def max_weight(self) -> int:
        return int(self.weights.max()) if self.weights.size else 0

    def arc_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Directed arcs as (src, dst, weight) arrays."""
        src = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        return src, self.indices.astype(np.int64), self.weights.astype(np.int64)

    @classmethod
    def from_edges(cls, node_count: int, u, v, w) -> "GenericGraph":
        """Build from undirected edges; both arc directions are added."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=np.int64)
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        ww = np.concatenate([w, w])
        order = np.argsort(src, kind="stable")
        src, dst, ww = src[order], dst[order], ww[order]
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(node_count, indptr, dst, ww)

    def to_json(self, path: str | Path):
        src, dst, w = self.arc_arrays()
        payload = {
            "node_count": self.node_count,
            "arcs": [[int(a), int(b), int(c)] for a, b, c in zip(src, dst, w)],
        }
        Path(path).write_text(json.dumps(payload))


def grid_graph(weight_maps: list[np.ndarray]) -> GenericGraph:
    """8-adjacency pixel graph from the four directional weight maps.

    ``weight_maps`` is the output of :func:`fomtrace.imgcore.pixel_weight_maps`
    (real-valued); weights are quantized jointly so every map shares one
    scale.
    """
    h = weight_maps[1].shape[0] + 1
    w = weight_maps[0].shape[1] + 1
    flat = np.concatenate([m.ravel() for m in weight_maps])
    q = quantize_weights(flat)
    offs = [(0, 1), (1, 0), (1, 1), (1, -1)]
    us, vs, ws = [], [], []
    pos = 0
    idx = np.arange(h * w).reshape(h, w)
    for (dy, dx), m in zip(offs, weight_maps):
        if dx >= 0:
            a = idx[: h - dy, : w - dx]
            b = idx[dy:, dx:]
        else:
            a = idx[: h - dy, -dx:]
            b = idx[dy:, : w + dx]
        n = a.size
        us.append(a.ravel())
        vs.append(b.ravel())
        ws.append(q[pos : pos + n])
        pos += n
    return GenericGraph.from_edges(
        h * w, np.concatenate(us), np.concatenate(vs), np.concatenate(ws)
    )


@dataclass(frozen=True)
class SeedSet:
    """Labeled seed nodes; insertion order defines tie precedence."""

    nodes: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int32)
        if nodes.ndim != 1 or nodes.shape != labels.shape:
            raise ValueError("nodes and labels must be 1-D and aligned")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class ForestResult:
    """Cost, predecessor, root and label maps of an optimum-path forest.

    ``cost`` holds IFT_INF for unreachable nodes; ``pred`` is -1 at roots,
    ``label`` is -1 where undefined.
    """

    cost: np.ndarray
    pred: np.ndarray
    root: np.ndarray
    label: np.ndarray

    @property
    def reached(self) -> np.ndarray:
        return self.cost < IFT_INF

    def to_json(self, path: str | Path):
        def col(arr, sentinel):
            return [None if v == sentinel else int(v) for v in arr]

        payload = {
            "cost": col(self.cost, IFT_INF),
            "pred": col(self.pred, -1),
            "root": col(self.root, -1),
            "label": col(self.label, -1),
        }
        Path(path).write_text(json.dumps(payload))


@numba.njit(cache=True)
def _iftsc_bucket(n, indptr, indices, weights, seed_nodes, seed_labels, wmax):
    cost = np.full(n, IFT_INF, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int32)
    root = np.full(n, -1, dtype=np.int32)
    label = np.full(n, -1, dtype=np.int32)
    done = np.zeros(n, dtype=np.uint8)

    cap = indices.size + seed_nodes.size + 1
    entry_node = np.empty(cap, dtype=np.int64)
    entry_next = np.full(cap, -1, dtype=np.int64)
    head = np.full(wmax + 1, -1, dtype=np.int64)
    tail = np.full(wmax + 1, -1, dtype=np.int64)
    count = 0

    for i in range(seed_nodes.size):
        s = seed_nodes[i]
        cost[s] = 0
        root[s] = s
        label[s] = seed_labels[i]
        entry_node[count] = s
        if head[0] == -1:
            head[0] = count
        else:
            entry_next[tail[0]] = count
        tail[0] = count
        count += 1

    b = 0
    while b <= wmax:
        e = head[b]
        if e == -1:
            b += 1
            continue
        head[b] = entry_next[e]
        if head[b] == -1:
            tail[b] = -1
        p = entry_node[e]
        if done[p] == 1 or cost[p] != b:
            continue
        done[p] = 1
        for ai in range(indptr[p], indptr[p + 1]):
            q = indices[ai]
            if done[q] == 1:
                continue
            t = cost[p]
            if weights[ai] > t:
                t = weights[ai]
            if t < cost[q]:
                cost[q] = t
                pred[q] = p
                root[q] = root[p]
                label[q] = label[p]
                entry_node[count] = q
                entry_next[count] = -1
                if head[t] == -1:
                    head[t] = count
                else:
                    entry_next[tail[t]] = count
                tail[t] = count
                count += 1
    return cost, pred, root, label


@numba.njit(cache=True)
def _iftsc_heap(n, indptr, indices, weights, seed_nodes, seed_labels):
    cost = np.full(n, IFT_INF, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int32)
    root = np.full(n, -1, dtype=np.int32)
    label = np.full(n, -1, dtype=np.int32)
    done = np.zeros(n, dtype=np.uint8)

    cap = indices.size + seed_nodes.size + 1
    # Key packs (cost, insertion sequence) so equal costs pop FIFO,
    # matching the bucket engine exactly.
    heap_key = np.empty(cap, dtype=np.int64)
    heap_node = np.empty(cap, dtype=np.int64)
    size = 0
    seq = 0

    for i in range(seed_nodes.size):
        s = seed_nodes[i]
        cost[s] = 0
        root[s] = s
        label[s] = seed_labels[i]
        key = seq
        seq += 1
        j = size
        size += 1
        heap_key[j] = key
        heap_node[j] = s
        while j > 0:
            parent = (j - 1) // 2
            if heap_key[parent] <= heap_key[j]:
                break
            heap_key[parent], heap_key[j] = heap_key[j], heap_key[parent]
            heap_node[parent], heap_node[j] = heap_node[j], heap_node[parent]
            j = parent

    while size > 0:
        k = heap_key[0]
        p = heap_node[0]
        size -= 1
        heap_key[0] = heap_key[size]
        heap_node[0] = heap_node[size]
        j = 0
        while True:
            left = 2 * j + 1
            if left >= size:
                break
            small = left
            right = left + 1
            if right < size and heap_key[right] < heap_key[left]:
                small = right
            if heap_key[j] <= heap_key[small]:
                break
            heap_key[j], heap_key[small] = heap_key[small], heap_key[j]
            heap_node[j], heap_node[small] = heap_node[small], heap_node[j]
            j = small
        c = k >> 32
        if done[p] == 1 or cost[p] != c:
            continue
        done[p] = 1
        for ai in range(indptr[p], indptr[p + 1]):
            q = indices[ai]
            if done[q] == 1:
                continue
            t = cost[p]
            if weights[ai] > t:
                t = weights[ai]
            if t < cost[q]:
                cost[q] = t
                pred[q] = p
                root[q] = root[p]
                label[q] = label[p]
                key = (t << 32) | seq
                seq += 1
                j = size
                size += 1
                heap_key[j] = key
                heap_node[j] = q
                while j > 0:
                    parent = (j - 1) // 2
                    if heap_key[parent] <= heap_key[j]:
                        break
                    heap_key[parent], heap_key[j] = heap_key[j], heap_key[parent]
                    heap_node[parent], heap_node[j] = heap_node[j], heap_node[parent]
                    j = parent
    return cost, pred, root, label


def _validate_seeds(graph: GenericGraph, seeds: SeedSet):
    if len(seeds) == 0:
        raise EmptySeedSet("at least one seed is required")
    if seeds.nodes.min() < 0 or seeds.nodes.max() >= graph.node_count:
        raise SeedOutOfRange(
            f"seed ids must lie in [0, {graph.node_count})"
        )
    if np.unique(seeds.nodes).size != seeds.nodes.size:
        raise ValueError("seed node ids must be unique")


def ift_sc(graph: GenericGraph, seeds: SeedSet, engine: str = "auto") -> ForestResult:
    """Optimum-path forest by seed competition under the max-arc path value.

    Every node reachable from a seed receives the minimum over all seed
    paths of the maximum arc weight along the path; unreachable nodes keep
    cost IFT_INF and label -1. Ties are broken first-come (FIFO queue
    order), so results are deterministic.
    """
    _validate_seeds(graph, seeds)
    if engine == "auto":
        engine = "bucket" if graph.max_weight <= BUCKET_BUDGET else "heap"
    indptr = graph.indptr.astype(np.int64, copy=False)
    indices = graph.indices.astype(np.int64, copy=False)
    weights = graph.weights.astype(np.int64, copy=False)
    if engine == "bucket":
        if graph.max_weight > BUCKET_BUDGET:
            raise ValueError("bucket engine requires weights within the budget")
        out = _iftsc_bucket(
            graph.node_count, indptr, indices, weights,
            seeds.nodes, seeds.labels, np.int64(graph.max_weight),
        )
    elif engine == "heap":
        out = _iftsc_heap(
            graph.node_count, indptr, indices, weights, seeds.nodes, seeds.labels
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return ForestResult(*out)


def minimax_oracle(graph: GenericGraph, seeds: SeedSet) -> np.ndarray:
    """Exact minimax path costs by repeated relaxation to a fixed point.

    Deliberately queue-free so it can serve as an independent oracle for
    :func:`ift_sc`.
    """
    if len(seeds) == 0:
        raise EmptySeedSet("at least one seed is required")
    src, dst, w = graph.arc_arrays()
    cost = np.full(graph.node_count, IFT_INF, dtype=np.int64)
    cost[seeds.nodes] = 0
    while True:
        cand = np.maximum(cost[src], w)
        new = cost.copy()
        np.minimum.at(new, dst, cand)
        if np.array_equal(new, cost):
            return cost
        cost = new
