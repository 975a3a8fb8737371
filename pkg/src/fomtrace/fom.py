"""Fuzzy object models: signed distance transforms, flow-based label
propagation, weighted model images, model seeds and pixel-graph refinement.

The model image combines two signed distance transforms, one from the
graph-predicted mask and one from the flow-propagated previous mask, and
is zero wherever the two masks disagree. Pixels deep enough on either
side become seeds for a final seed competition on the pixel graph, which
decides the uncertainty band.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import splu

from .errors import DimensionMismatch, EmptySeedSet, NoForegroundSeeds
from .flow import SuperpixelFlow
from .ift import ForestResult, SeedSet, grid_graph, ift_sc
from .imgcore import Frame, LabelMap, SeedPixels, merge_seeds, pixel_weight_maps
from .superpix import SuperpixelDecomposition

DEFAULT_ALPHA_F = 3.0
DEFAULT_ALPHA_B = -2.0


def signed_edt(label: LabelMap, k: int) -> np.ndarray:
    """Signed Euclidean distance for object ``k``.

    Positive at pixels labeled ``k`` (distance to the nearest pixel of any
    other label), negative elsewhere (distance to the nearest ``k`` pixel).
    When one side is empty the other side is capped at the image diagonal.
    """
    lab = label.labels
    inside = lab == k
    diag = float(np.hypot(*lab.shape))
    if inside.all():
        return np.full(lab.shape, diag)
    if not inside.any():
        return np.full(lab.shape, -diag)
    pos = ndimage.distance_transform_edt(inside)
    neg = ndimage.distance_transform_edt(~inside)
    return np.where(inside, pos, -neg)


def rounded_superpixel_shift(
    decomp: SuperpixelDecomposition, spflow: SuperpixelFlow
) -> tuple[np.ndarray, np.ndarray]:
    """Integer (dy, dx) per pixel from its superpixel's mean displacement."""
    uv = np.rint(spflow.uv).astype(np.int64)
    per_pixel = uv[decomp.assignment - 1]
    return per_pixel[..., 1], per_pixel[..., 0]


def propagate_label(
    label_prev: LabelMap,
    decomp_prev: SuperpixelDecomposition,
    spflow: SuperpixelFlow,
) -> LabelMap:
    """Move every pixel's label by its superpixel's rounded mean flow.

    Collisions keep the higher label; uncovered destinations become
    background; moves landing outside the frame are dropped.
    """
    if label_prev.shape != decomp_prev.shape:
        raise DimensionMismatch("label and decomposition dimensions differ")
    h, w = label_prev.shape
    dy, dx = rounded_superpixel_shift(decomp_prev, spflow)
    yy, xx = np.mgrid[0:h, 0:w]
    ny = (yy + dy).ravel()
    nx = (xx + dx).ravel()
    ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    out = np.zeros((h, w), dtype=np.int32)
    np.maximum.at(out, (ny[ok], nx[ok]), label_prev.labels.ravel()[ok])
    return LabelMap(out)


def fuzzy_image(
    e_tilde: np.ndarray,
    e_hat: np.ndarray,
    w_tilde: np.ndarray,
    l_tilde: LabelMap,
    l_hat: LabelMap,
) -> np.ndarray:
    """Weighted blend of the two signed distance maps, zero on disagreement.

    ``o = (e_tilde * w + e_hat * (1 - w)) * [l_tilde == l_hat]``.
    """
    for m in (e_hat, w_tilde):
        if m.shape != e_tilde.shape:
            raise DimensionMismatch("model input dimensions differ")
    if l_tilde.shape != e_tilde.shape or l_hat.shape != e_tilde.shape:
        raise DimensionMismatch("label dimensions differ")
    agree = (l_tilde.labels == l_hat.labels).astype(np.float64)
    return (e_tilde * w_tilde + e_hat * (1.0 - w_tilde)) * agree


def fuzzy_image_weighted(
    e_tilde: np.ndarray,
    e_hat: np.ndarray,
    w_tilde: np.ndarray,
    l_tilde: LabelMap,
    l_hat: LabelMap,
    gamma: float,
) -> np.ndarray:
    """Hard variant: take the propagated distance outright where the weight
    image reaches ``gamma``, the blended model elsewhere."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    blended = fuzzy_image(e_tilde, e_hat, w_tilde, l_tilde, l_hat)
    return np.where(w_tilde >= gamma, e_tilde, blended)


def diffusion_inpaint(frame: Frame, mask: np.ndarray) -> np.ndarray:
    """Fill the masked region by neighbor averaging run to convergence.

    Solves the harmonic fixed point of iterative 4-neighbor averaging with
    the unmasked pixels as boundary values. Returns a full (H, W, 3) array.
    """
    mask = np.asarray(mask, dtype=bool)
    img = frame.data
    if not mask.any():
        return img.copy()
    if mask.all():
        return img.copy()
    h, w = mask.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask)
    n = ys.size
    idx[ys, xs] = np.arange(n)

    rows, cols, vals = [], [], []
    rhs = np.zeros((n, 3))
    deg = np.zeros(n)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        deg += ok
        inner = ok & mask[np.clip(ny, 0, h - 1), np.clip(nx, 0, w - 1)]
        rows.append(np.nonzero(inner)[0])
        cols.append(idx[ny[inner], nx[inner]])
        vals.append(-np.ones(inner.sum()))
        outer = ok & ~inner
        np.add.at(rhs, np.nonzero(outer)[0], img[ny[outer], nx[outer]])
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(deg)
    mat = csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    solve = splu(mat.tocsc()).solve
    out = img.copy()
    out[ys, xs] = solve(rhs)
    return np.clip(out, 0.0, 255.0)


def weight_image(
    frame_prev: Frame,
    label_prev: LabelMap,
    decomp_prev: SuperpixelDecomposition,
    spflow: SuperpixelFlow,
    inpaint=diffusion_inpaint,
    inpainted: np.ndarray | None = None,
) -> np.ndarray:
    """Leak-risk weight image propagated to the current frame.

    Inpaints the (binarized) object region, scores each pixel by how
    little the original differs from the inpainted content, and moves the
    result forward by the superpixel mean flow. Destinations nothing maps
    onto get the neutral weight 0.5; destination collisions keep the
    largest weight. ``inpainted`` may supply a precomputed fill.
    """
    mask = label_prev.labels > 0
    filled = inpainted if inpainted is not None else inpaint(frame_prev, mask)
    j = np.abs(frame_prev.data - filled).sum(axis=2)
    jmax = j.max()
    # guard: solver residue on an exact reproduction must not blow up
    j = j / jmax if jmax > 1e-9 else np.zeros_like(j)
    w_prev = 1.0 - j

    h, w = label_prev.shape
    dy, dx = rounded_superpixel_shift(decomp_prev, spflow)
    yy, xx = np.mgrid[0:h, 0:w]
    ny = (yy + dy).ravel()
    nx = (xx + dx).ravel()
    ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
    out = np.full((h, w), -1.0)
    np.maximum.at(out, (ny[ok], nx[ok]), w_prev.ravel()[ok])
    out[out < 0] = 0.5
    return out


def build_fuzzy_model(
    l_tilde: LabelMap,
    l_hat: LabelMap,
    w_tilde: np.ndarray,
    gamma: float | None = None,
) -> np.ndarray:
    """Per-object model stack of shape (K, H, W).

    ``gamma=None`` gives the blended model; otherwise the hard variant.
    Object count is the larger of the two masks' maxima so a vanished or
    hallucinated object still gets a plane.
    """
    kmax = max(l_tilde.num_objects, l_hat.num_objects, 1)
    planes = []
    for k in range(1, kmax + 1):
        e_tilde = signed_edt(l_tilde, k)
        e_hat = signed_edt(l_hat, k)
        if gamma is None:
            planes.append(fuzzy_image(e_tilde, e_hat, w_tilde, l_tilde, l_hat))
        else:
            planes.append(
                fuzzy_image_weighted(e_tilde, e_hat, w_tilde, l_tilde, l_hat, gamma)
            )
    return np.stack(planes)


def model_seeds(
    model: np.ndarray,
    alpha_f: float = DEFAULT_ALPHA_F,
    alpha_b: float = DEFAULT_ALPHA_B,
) -> SeedPixels:
    """Threshold a model stack into labeled seed pixels.

    Foreground seeds for object k where its plane reaches ``alpha_f``
    (inclusive); background seeds where every plane is at most
    ``alpha_b``. Raises :class:`NoForegroundSeeds` when no object
    survives the threshold.
    """
    if not alpha_b < 0 < alpha_f:
        raise ValueError("alpha_b must be negative and alpha_f positive")
    stack = model if model.ndim == 3 else model[None]
    seed_map = np.full(stack.shape[1:], -1, dtype=np.int32)
    seed_map[stack.max(axis=0) <= alpha_b] = 0
    for k in range(stack.shape[0]):
        seed_map[stack[k] >= alpha_f] = k + 1
    if not (seed_map > 0).any():
        raise NoForegroundSeeds("model offers no interior seeds")
    ys, xs = np.nonzero(seed_map >= 0)
    return SeedPixels(ys, xs, seed_map[ys, xs])


def refine(
    frame: Frame,
    seeds: SeedPixels,
    extra_scribbles: SeedPixels | None = None,
) -> tuple[LabelMap, ForestResult]:
    """Seed competition on the 8-adjacency pixel graph of ``frame``.

    Scribbles override model seeds at shared pixels. Unseeded pockets
    inside either region are closed by the competition itself. Returns
    the pixel labels and the forest (kept for later corrections).
    """
    if extra_scribbles is not None and len(extra_scribbles):
        seeds = merge_seeds(seeds, extra_scribbles)
    if len(seeds) == 0:
        raise EmptySeedSet("refinement requires at least one seed")
    seeds.check_domain(frame.shape)
    h, w = frame.shape
    graph = grid_graph(pixel_weight_maps(frame))
    node_ids = seeds.ys * w + seeds.xs
    forest = ift_sc(graph, SeedSet(node_ids, seeds.labels))
    labels = forest.label.reshape(h, w).astype(np.int32)
    labels[labels < 0] = 0
    return LabelMap(labels), forest


def render_model_png(model: np.ndarray, path):
    """Debug export: signed model values affinely mapped so 128 = zero."""
    plane = model.max(axis=0) if model.ndim == 3 else model
    scale = max(np.abs(plane).max(), 1e-9)
    img = np.clip(128.0 + plane * (127.0 / scale), 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path, format="PNG")


def render_weight_png(w_tilde: np.ndarray, path):
    img = np.clip(w_tilde * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path, format="PNG")
