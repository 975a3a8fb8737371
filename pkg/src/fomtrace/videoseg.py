"""Windowed spatiotemporal superpixel graphs and label prediction.

Nodes are the superpixels of every frame in the window. Arcs connect
superpixels sharing a pixel edge within a frame, and superpixels of
adjacent frames whose pixel sets overlap directly or after warping by the
mean superpixel flow (both time directions). Arc weights are mean-color
distances; a seed competition from the window's first frame predicts the
labels of every later frame.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CoverageGap, NoSeeds, WindowTooShort
from .flow import FlowField, mean_superpixel_flow
from .ift import GenericGraph, SeedSet, ift_sc, quantize_weights
from .imgcore import LabelMap, seed_pixels_from_label
from .superpix import SuperpixelDecomposition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuperpixelSeedSet:
    """Seed superpixels of the window's first frame (ids are 1-based)."""

    sp_ids: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.sp_ids.size


@dataclass(frozen=True)
class SpatioTemporalGraph:
    """Superpixel graph over frames ``t_start..t_end`` (inclusive)."""

    t_start: int
    t_end: int
    offsets: np.ndarray  # node id base per frame, len = frames + 1
    graph: GenericGraph
    node_colors: np.ndarray  # (N, 3) mean colors
    edges: np.ndarray  # (E, 2) unique undirected node pairs
    edge_kinds: np.ndarray  # (E,) 0 = spatial, 1 = temporal

    def node_id(self, t: int, sp_id: int) -> int:
        return int(self.offsets[t - self.t_start]) + sp_id - 1

    def frame_slice(self, t: int) -> slice:
        i = t - self.t_start
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    @property
    def node_count(self) -> int:
        return int(self.offsets[-1])

    def seed_set(self, seeds: SuperpixelSeedSet) -> SeedSet:
        nodes = self.offsets[0] + seeds.sp_ids.astype(np.int64) - 1
        return SeedSet(nodes, seeds.labels)

    def to_json(self, path: str | Path):
        # One weight per undirected edge, looked up in the CSR arrays.
        weights = []
        for u, v in self.edges:
            row = slice(self.graph.indptr[u], self.graph.indptr[u + 1])
            pos = np.nonzero(self.graph.indices[row] == v)[0][0]
            weights.append(int(self.graph.weights[row][pos]))
        payload = {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "offsets": self.offsets.tolist(),
            "edges": self.edges.tolist(),
            "weights": weights,
            "kinds": ["spatial" if k == 0 else "temporal" for k in self.edge_kinds],
        }
        Path(path).write_text(json.dumps(payload))


def _spatial_pairs(assign: np.ndarray) -> np.ndarray:
    """Unique pairs of superpixel ids whose pixels share an edge."""
    pairs = []
    a, b = assign[:, :-1], assign[:, 1:]
    d = a != b
    pairs.append(np.stack([a[d], b[d]], axis=1))
    a, b = assign[:-1, :], assign[1:, :]
    d = a != b
    pairs.append(np.stack([a[d], b[d]], axis=1))
    p = np.concatenate(pairs)
    p = np.stack([p.min(axis=1), p.max(axis=1)], axis=1)
    return np.unique(p, axis=0)


def _shifted_lookup(assign_src, assign_dst, dy, dx):
    """Pairs (src id, dst id at the shifted position), in-bounds only."""
    h, w = assign_src.shape
    yy, xx = np.mgrid[0:h, 0:w]
    ny = (yy + dy).ravel()
    nx = (xx + dx).ravel()
    ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    return np.stack(
        [assign_src.ravel()[ok], assign_dst[ny[ok], nx[ok]]], axis=1
    )


def build_graph(
    frames,
    decomps: list[SuperpixelDecomposition],
    flows: list[FlowField],
    window: tuple[int, int],
) -> SpatioTemporalGraph:
    """Assemble the superpixel graph for frames ``window[0]..window[1]``.

    ``decomps`` and ``flows`` are indexed by absolute frame index;
    ``flows[t]`` maps frame t toward t+1.
    """
    t0, t1 = window
    if t1 - t0 + 1 < 2:
        raise WindowTooShort("window must span at least two frames")
    for t in range(t0, t1 + 1):
        if t >= len(decomps) or decomps[t] is None:
            raise CoverageGap(f"missing decomposition for frame {t}")
    for t in range(t0, t1):
        if t >= len(flows) or flows[t] is None:
            raise CoverageGap(f"missing flow for frames {t}->{t + 1}")

    counts = [decomps[t].n for t in range(t0, t1 + 1)]
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    node_colors = np.concatenate([decomps[t].mean_colors for t in range(t0, t1 + 1)])

    edges = []
    kinds = []
    for i, t in enumerate(range(t0, t1 + 1)):
        sp = _spatial_pairs(decomps[t].assignment)
        edges.append(sp - 1 + offsets[i])
        kinds.append(np.zeros(len(sp), dtype=np.int8))

    for i, t in enumerate(range(t0, t1)):
        a_t = decomps[t].assignment
        a_n = decomps[t + 1].assignment
        direct = np.stack([a_t.ravel(), a_n.ravel()], axis=1)

        fwd_uv = np.rint(mean_superpixel_flow(decomps[t], flows[t]).uv).astype(int)
        shift = fwd_uv[a_t - 1]
        forward = _shifted_lookup(a_t, a_n, shift[..., 1], shift[..., 0])

        back_uv = np.rint(-mean_superpixel_flow(decomps[t + 1], flows[t]).uv).astype(int)
        shift_b = back_uv[a_n - 1]
        backward = _shifted_lookup(a_n, a_t, shift_b[..., 1], shift_b[..., 0])[:, ::-1]

        pairs = np.concatenate([direct, forward, backward])
        pairs = np.unique(pairs, axis=0)
        glob = np.stack(
            [pairs[:, 0] - 1 + offsets[i], pairs[:, 1] - 1 + offsets[i + 1]], axis=1
        )
        edges.append(glob)
        kinds.append(np.ones(len(glob), dtype=np.int8))

    edges = np.concatenate(edges)
    kinds = np.concatenate(kinds)
    diff = node_colors[edges[:, 0]] - node_colors[edges[:, 1]]
    weights = quantize_weights(np.sqrt((diff**2).sum(axis=1)))
    graph = GenericGraph.from_edges(
        int(offsets[-1]), edges[:, 0], edges[:, 1], weights
    )
    return SpatioTemporalGraph(
        t0, t1, offsets, graph, node_colors, edges, kinds
    )


def superpixel_seeds_from_label(
    label_prev: LabelMap,
    decomp_prev: SuperpixelDecomposition,
    rho_e: int = 2,
    rho_d: int = 3,
) -> SuperpixelSeedSet:
    """Seed superpixels from the previous frame's accepted labels.

    A superpixel is a seed iff it contains at least one seed pixel from
    the eroded-object / outside-dilation rule; its label is the one with
    the most seed pixels, ties resolved toward background.
    """
    if not (label_prev.labels > 0).any():
        raise NoSeeds("label image contains no object pixels")
    if label_prev.shape != decomp_prev.shape:
        raise CoverageGap("label and decomposition dimensions differ")
    pix = seed_pixels_from_label(label_prev, rho_e, rho_d)
    sp = decomp_prev.assignment[pix.ys, pix.xs] - 1
    kmax = int(pix.labels.max())
    counts = np.zeros((decomp_prev.n, kmax + 1), dtype=np.int64)
    np.add.at(counts, (sp, pix.labels), 1)
    seeded = counts.sum(axis=1) > 0
    # argmax returns the first maximum, so background (column 0) wins ties.
    winners = counts.argmax(axis=1)
    ids = np.nonzero(seeded)[0]
    return SuperpixelSeedSet(
        (ids + 1).astype(np.int64), winners[ids].astype(np.int32)
    )


def predict_labels(
    graph: SpatioTemporalGraph,
    seeds: SuperpixelSeedSet,
    decomps: list[SuperpixelDecomposition],
) -> list[LabelMap]:
    """Run the seed competition and render labels for every later frame."""
    if len(seeds) == 0:
        raise NoSeeds("empty superpixel seed set")
    forest = ift_sc(graph.graph, graph.seed_set(seeds))
    node_labels = forest.label.copy()
    unreached = node_labels < 0
    if unreached.any():
        log.warning(
            "%d superpixels unreached by any seed; defaulting to background",
            int(unreached.sum()),
        )
        node_labels[unreached] = 0
    out = []
    for t in range(graph.t_start + 1, graph.t_end + 1):
        sl = graph.frame_slice(t)
        lab = node_labels[sl][decomps[t].assignment - 1]
        out.append(LabelMap(lab.astype(np.int32)))
    return out
