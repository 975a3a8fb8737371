"""SLICO superpixel decomposition of single frames.

The zero-parameter SLIC variant: cluster centers start on a regular grid
and the color compactness is adapted per cluster from the maximum color
distance observed in the previous iteration. Distances use YCbCr so the
whole toolkit shares one color space. A final pass absorbs disconnected
orphan components into the largest adjacent superpixel, so every
superpixel is 8-connected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import FrameTooSmall
from .imgcore import Frame

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SuperpixelDecomposition:
    """Per-pixel superpixel ids 1..n with per-superpixel statistics."""

    assignment: np.ndarray  # (H, W) int32, ids 1..n
    mean_colors: np.ndarray  # (n, 3) float64, row k-1 for superpixel k
    centroids: np.ndarray  # (n, 2) float64 (y, x)
    sizes: np.ndarray  # (n,) int64

    @property
    def n(self) -> int:
        return self.mean_colors.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignment.shape


@numba.njit(cache=True)
def _slico_assign(img, step, cy, cx, cc, m2, iterations):
    h, w = img.shape[0], img.shape[1]
    n = cy.size
    s2 = float(step * step)
    lab = np.full((h, w), -1, dtype=np.int32)
    for _ in range(iterations):
        dist = np.full((h, w), np.inf, dtype=np.float64)
        lab[:] = -1
        for k in range(n):
            y0 = max(int(cy[k]) - step, 0)
            y1 = min(int(cy[k]) + step + 1, h)
            x0 = max(int(cx[k]) - step, 0)
            x1 = min(int(cx[k]) + step + 1, w)
            for y in range(y0, y1):
                for x in range(x0, x1):
                    d0 = img[y, x, 0] - cc[k, 0]
                    d1 = img[y, x, 1] - cc[k, 1]
                    d2 = img[y, x, 2] - cc[k, 2]
                    dc2 = d0 * d0 + d1 * d1 + d2 * d2
                    dy = y - cy[k]
                    dx = x - cx[k]
                    d = dc2 / m2[k] + (dy * dy + dx * dx) / s2
                    if d < dist[y, x]:
                        dist[y, x] = d
                        lab[y, x] = k
        # Pixels beyond every search window fall back to the spatially
        # nearest center.
        for y in range(h):
            for x in range(w):
                if lab[y, x] == -1:
                    best = np.inf
                    for k in range(n):
                        dy = y - cy[k]
                        dx = x - cx[k]
                        d = dy * dy + dx * dx
                        if d < best:
                            best = d
                            lab[y, x] = k
        # Adaptive compactness: per-cluster max color distance seen.
        new_m2 = np.ones(n, dtype=np.float64)
        for y in range(h):
            for x in range(w):
                k = lab[y, x]
                d0 = img[y, x, 0] - cc[k, 0]
                d1 = img[y, x, 1] - cc[k, 1]
                d2 = img[y, x, 2] - cc[k, 2]
                dc2 = d0 * d0 + d1 * d1 + d2 * d2
                if dc2 > new_m2[k]:
                    new_m2[k] = dc2
        m2[:] = new_m2
        # Move centers to the cluster means.
        sy = np.zeros(n, dtype=np.float64)
        sx = np.zeros(n, dtype=np.float64)
        sc = np.zeros((n, 3), dtype=np.float64)
        cnt = np.zeros(n, dtype=np.int64)
        for y in range(h):
            for x in range(w):
                k = lab[y, x]
                sy[k] += y
                sx[k] += x
                sc[k, 0] += img[y, x, 0]
                sc[k, 1] += img[y, x, 1]
                sc[k, 2] += img[y, x, 2]
                cnt[k] += 1
        for k in range(n):
            if cnt[k] > 0:
                cy[k] = sy[k] / cnt[k]
                cx[k] = sx[k] / cnt[k]
                cc[k, 0] = sc[k, 0] / cnt[k]
                cc[k, 1] = sc[k, 1] / cnt[k]
                cc[k, 2] = sc[k, 2] / cnt[k]
    return lab


def _absorb_orphans(assignment: np.ndarray) -> np.ndarray:
    """Keep each id's largest connected component; merge the rest into the
    largest adjacent superpixel (ties toward the smallest id)."""
    h, w = assignment.shape
    out = assignment.copy()
    boxes = ndimage.find_objects(out)
    sizes = {}
    orphans = []  # (id, component pixel coords)
    for k, sl in enumerate(boxes, start=1):
        if sl is None:
            continue
        mask = out[sl] == k
        comp, ncomp = ndimage.label(mask, structure=_EIGHT)
        if ncomp == 1:
            sizes[k] = int(mask.sum())
            continue
        counts = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(counts)) + 1  # first max -> smallest comp id
        sizes[k] = int(counts[keep - 1])
        oy, ox = sl[0].start, sl[1].start
        for c in range(1, ncomp + 1):
            if c == keep:
                continue
            ys, xs = np.nonzero(comp == c)
            orphans.append((k, ys + oy, xs + ox))

    if not orphans:
        return out

    kept = np.ones((h, w), dtype=bool)
    for _, ys, xs in orphans:
        kept[ys, xs] = False

    offs = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    pending = orphans
    while pending:
        deferred = []
        progressed = False
        for orig, ys, xs in pending:
            votes: dict[int, bool] = {}
            for dy, dx in offs:
                ny = ys + dy
                nx = xs + dx
                ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
                if not ok.any():
                    continue
                ny, nx = ny[ok], nx[ok]
                inside = kept[ny, nx]
                for nid in np.unique(out[ny[inside], nx[inside]]):
                    votes[int(nid)] = True
            if not votes:
                deferred.append((orig, ys, xs))
                continue
            target = max(votes, key=lambda i: (sizes[i], -i))
            out[ys, xs] = target
            kept[ys, xs] = True
            sizes[target] += ys.size
            progressed = True
        if not progressed:
            raise RuntimeError("orphan absorption stalled")
        pending = deferred
    return out


def slico(frame: Frame, grid_step: int = 5, iterations: int = 10) -> SuperpixelDecomposition:
    """Decompose a frame into compact, 8-connected superpixels.

    Centers start on a regular grid spaced ``grid_step`` pixels apart.
    """
    h, w = frame.shape
    if grid_step < 2 or grid_step > min(h, w):
        raise FrameTooSmall(
            f"grid_step {grid_step} incompatible with frame {w}x{h}"
        )
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    img = np.ascontiguousarray(frame.data)
    ys = np.arange(grid_step / 2.0, h, grid_step)
    xs = np.arange(grid_step / 2.0, w, grid_step)
    cy, cx = [a.ravel().astype(np.float64) for a in np.meshgrid(ys, xs, indexing="ij")]
    cc = img[
        np.clip(np.round(cy).astype(int), 0, h - 1),
        np.clip(np.round(cx).astype(int), 0, w - 1),
    ].copy()
    m2 = np.full(cy.size, 100.0)  # (compactness 10)^2 before adaptation
    lab = _slico_assign(img, int(grid_step), cy, cx, cc, m2, int(iterations))
    lab = _absorb_orphans(lab + 1)

    # Compact relabel to 1..n in row-major first-appearance order.
    flat = lab.ravel()
    _, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    assignment = (order[inv] + 1).astype(np.int32).reshape(lab.shape)

    n = int(assignment.max())
    flat = assignment.ravel() - 1
    sizes = np.bincount(flat, minlength=n).astype(np.int64)
    mean_colors = np.stack(
        [np.bincount(flat, weights=img[..., c].ravel(), minlength=n) for c in range(3)],
        axis=1,
    ) / sizes[:, None]
    yy, xx = np.mgrid[0:h, 0:w]
    centroids = np.stack(
        [
            np.bincount(flat, weights=yy.ravel(), minlength=n),
            np.bincount(flat, weights=xx.ravel(), minlength=n),
        ],
        axis=1,
    ) / sizes[:, None]
    return SuperpixelDecomposition(assignment, mean_colors, centroids, sizes)


def save_assignment_png(decomp: SuperpixelDecomposition, path):
    """Debug export: assignment map as 16-bit grayscale PNG."""
    if decomp.n > 65535:
        raise ValueError("too many superpixels for 16-bit export")
    Image.fromarray(decomp.assignment.astype(np.uint16)).save(path)


def boundary_mask(decomp: SuperpixelDecomposition) -> np.ndarray:
    a = decomp.assignment
    edge = np.zeros(a.shape, dtype=bool)
    edge[:, :-1] |= a[:, :-1] != a[:, 1:]
    edge[:-1, :] |= a[:-1, :] != a[1:, :]
    return edge


def save_boundary_png(decomp: SuperpixelDecomposition, rgb: np.ndarray, path):
    """Debug export: superpixel boundaries drawn over an RGB image."""
    img = np.asarray(rgb, dtype=np.uint8).copy()
    img[boundary_mask(decomp)] = (255, 0, 0)
    Image.fromarray(img, mode="RGB").save(path)
