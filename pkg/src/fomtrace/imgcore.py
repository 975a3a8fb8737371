"""Frames, label maps, seeds, color conversion, morphology, and image I/O.

Internally every frame is YCbCr with float64 channels in [0, 255]; label
maps are int32 with 0 = background and 1..K = objects; binary masks are
plain bool arrays. Pixel coordinates are (row, col).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionMismatch, EmptyObjectSeeds

# BT.601 full-range RGB -> YCbCr matrix and offset.
_RGB2YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_OFFSET = np.array([0.0, 128.0, 128.0])


@dataclass(frozen=True)
class Frame:
    """A single video frame, YCbCr float64 of shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError("frame data must have shape (H, W, 3)")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        if self.data.min() < 0.0 or self.data.max() > 255.0:
            raise ValueError("channel values must lie in [0, 255]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel object labels, 0 = background, 1..K = objects."""

    labels: np.ndarray

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise ValueError("label map must be 2-D")
        if self.labels.dtype.kind not in "iu":
            raise ValueError("labels must be integers")
        if self.labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", self.labels.astype(np.int32, copy=False))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def num_objects(self) -> int:
        return int(self.labels.max())

    def object_ids(self) -> list[int]:
        ids = np.unique(self.labels)
        return [int(k) for k in ids if k > 0]


@dataclass(frozen=True)
class SeedPixels:
    """Labeled seed pixels: parallel arrays of rows, cols and labels."""

    ys: np.ndarray
    xs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        ys = np.asarray(self.ys, dtype=np.int64)
        xs = np.asarray(self.xs, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int32)
        if not (ys.shape == xs.shape == labels.shape) or ys.ndim != 1:
            raise ValueError("ys, xs, labels must be 1-D arrays of equal length")
        if ys.size:
            if ys.min() < 0 or xs.min() < 0:
                raise ValueError("seed coordinates must be non-negative")
            flat = ys * (xs.max() + 1) + xs
            if np.unique(flat).size != flat.size:
                raise ValueError("duplicate seed coordinates")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.ys.size

    def check_domain(self, shape: tuple[int, int]):
        h, w = shape
        if len(self) and (self.ys.max() >= h or self.xs.max() >= w):
            raise ValueError("seed coordinates outside the frame domain")


def merge_seeds(base: SeedPixels, override: SeedPixels) -> SeedPixels:
    """Union of two seed sets; ``override`` wins at shared coordinates."""
    if len(override) == 0:
        return base
    if len(base) == 0:
        return override
    width = int(max(base.xs.max(), override.xs.max())) + 1
    taken = set((override.ys * width + override.xs).tolist())
    keep = np.array(
        [(y * width + x) not in taken for y, x in zip(base.ys, base.xs)], dtype=bool
    )
    return SeedPixels(
        np.concatenate([base.ys[keep], override.ys]),
        np.concatenate([base.xs[keep], override.xs]),
        np.concatenate([base.labels[keep], override.labels]),
    )


def to_ycbcr(rgb: np.ndarray) -> Frame:
    """Convert an RGB image (channels in [0, 255]) to a YCbCr Frame.

    Uses the BT.601 full-range matrix; the result is clamped to [0, 255].
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) RGB image")
    ycc = rgb @ _RGB2YCBCR.T + _YCBCR_OFFSET
    return Frame(np.clip(ycc, 0.0, 255.0))


def to_rgb(frame: Frame) -> np.ndarray:
    """Inverse of :func:`to_ycbcr`; returns uint8 RGB."""
    inv = np.linalg.inv(_RGB2YCBCR)
    rgb = (frame.data - _YCBCR_OFFSET) @ inv.T
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


def disk_offsets(radius: int) -> np.ndarray:
    """Integer offsets (dy, dx) with dy^2 + dx^2 <= radius^2."""
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dy * dy + dx * dx <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1)


def _disk_structure(radius: int) -> np.ndarray:
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return dy * dy + dx * dx <= r * r


def morph_disk(mask: np.ndarray, radius: int, mode: str) -> np.ndarray:
    """Binary erosion or dilation with a discrete disk structuring element.

    Pixels outside the image domain count as background.
    """
    if mode not in ("erode", "dilate"):
        raise ValueError(f"unknown mode {mode!r}")
    mask = np.asarray(mask, dtype=bool)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return mask.copy()
    struct = _disk_structure(radius)
    if mode == "erode":
        return ndimage.binary_erosion(mask, structure=struct, border_value=0)
    return ndimage.binary_dilation(mask, structure=struct, border_value=0)


def seed_pixels_from_label(label: LabelMap, rho_e: int, rho_d: int) -> SeedPixels:
    """Interior/exterior seeds from a label image.

    Each object region eroded by ``rho_e`` yields seeds with the object's
    label; everything outside the union of object regions dilated by
    ``rho_d`` yields background seeds. Raises :class:`EmptyObjectSeeds`
    when some object erodes away entirely (callers may retry with
    ``rho_e=0``).
    """
    lab = label.labels
    seed_map = np.full(lab.shape, -1, dtype=np.int32)
    any_fg = lab > 0
    outside = ~morph_disk(any_fg, rho_d, "dilate")
    seed_map[outside] = 0
    for k in label.object_ids():
        core = morph_disk(lab == k, rho_e, "erode")
        if not core.any():
            raise EmptyObjectSeeds(f"object {k} erodes to nothing at rho_e={rho_e}")
        seed_map[core] = k
    ys, xs = np.nonzero(seed_map >= 0)
    return SeedPixels(ys, xs, seed_map[ys, xs])


def pixel_arc_weight(frame: Frame, p: tuple[int, int], q: tuple[int, int]) -> float:
    """Color-difference weight of the arc between two 8-adjacent pixels."""
    py, px = p
    qy, qx = q
    if max(abs(py - qy), abs(px - qx)) != 1:
        raise ValueError("pixels must be 8-adjacent")
    d = frame.data[py, px] - frame.data[qy, qx]
    return float(np.sqrt(np.dot(d, d)))


# Unique arc directions of the 8-neighborhood; the reverse arcs are implied
# by symmetry. Order: E, S, SE, SW.
GRID_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))


def pixel_weight_maps(frame: Frame) -> list[np.ndarray]:
    """Arc-weight maps for the four unique grid directions.

    Entry ``(y, x)`` of map ``i`` weighs the arc from pixel ``(y, x)`` to
    ``(y + dy, x + dx)`` for ``GRID_OFFSETS[i]``; rows/cols without such a
    neighbor are trimmed.
    """
    img = frame.data
    maps = []
    for dy, dx in GRID_OFFSETS:
        if dx >= 0:
            a = img[: img.shape[0] - dy, : img.shape[1] - dx]
            b = img[dy:, dx:]
        else:
            a = img[: img.shape[0] - dy, -dx:]
            b = img[dy:, : img.shape[1] + dx]
        maps.append(np.sqrt(((a - b) ** 2).sum(axis=2)))
    return maps


# ---------------------------------------------------------------------------
# Sequence and mask I/O: frame_%05d.png / mask_%05d.png, consecutive from 0.
# ---------------------------------------------------------------------------

FRAME_PATTERN = "frame_%05d.png"
MASK_PATTERN = "mask_%05d.png"


def load_frame(path: str | Path) -> Frame:
    img = Image.open(path).convert("RGB")
    return to_ycbcr(np.asarray(img, dtype=np.float64))


def save_frame_rgb(rgb: np.ndarray, path: str | Path):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def load_label(path: str | Path) -> LabelMap:
    img = Image.open(path).convert("L")
    return LabelMap(np.asarray(img, dtype=np.int32))


def save_label(label: LabelMap, path: str | Path):
    if label.labels.max() > 255:
        raise ValueError("label ids beyond 255 cannot be stored as 8-bit PNG")
    Image.fromarray(label.labels.astype(np.uint8), mode="L").save(path)


def sequence_paths(directory: str | Path, pattern: str = FRAME_PATTERN) -> list[Path]:
    """Consecutive files ``pattern % 0..n-1`` present in ``directory``."""
    directory = Path(directory)
    paths = []
    t = 0
    while True:
        p = directory / (pattern % t)
        if not p.exists():
            break
        paths.append(p)
        t += 1
    return paths


def load_sequence(directory: str | Path) -> list[Frame]:
    paths = sequence_paths(directory)
    if not paths:
        raise FileNotFoundError(f"no {FRAME_PATTERN % 0} found in {directory}")
    return [load_frame(p) for p in paths]


def frame_index(path: str | Path) -> int:
    m = re.search(r"(\d+)\.png$", str(path))
    if not m:
        raise ValueError(f"cannot parse frame index from {path}")
    return int(m.group(1))


def require_same_shape(a, b):
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"shape {a.shape[:2]} vs {b.shape[:2]}")
