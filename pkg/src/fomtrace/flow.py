"""Dense optical flow between consecutive frames.

A coarse-to-fine pyramidal Horn-Schunck baseline plus Middlebury ``.flo``
import/export so externally computed flow can be dropped in. Vectors are
(u, v) = (dx, dy) in pixels per frame, mapping frame-t coordinates toward
frame t+1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import BadMagic, DimensionMismatch, TruncatedFile
from .imgcore import Frame
from .superpix import SuperpixelDecomposition

_FLO_MAGIC = b"PIEH"

# Horn-Schunck neighborhood average weights.
_HS_KERNEL = np.array(
    [[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]]
)


@dataclass(frozen=True)
class FlowField:
    """Per-pixel forward displacements, shape (H, W, 2) float32."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float32)
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError("flow must have shape (H, W, 2)")
        if not np.isfinite(v).all():
            raise ValueError("flow must be finite")
        object.__setattr__(self, "vectors", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[:2]

    @property
    def u(self) -> np.ndarray:
        return self.vectors[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.vectors[..., 1]


@dataclass(frozen=True)
class SuperpixelFlow:
    """Mean displacement (u, v) per superpixel, shape (n, 2)."""

    uv: np.ndarray


def _downsample(img: np.ndarray) -> np.ndarray:
    smooth = ndimage.gaussian_filter(img, 1.0, mode="nearest")
    return smooth[::2, ::2]


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    sy = np.clip(yy + v, 0, h - 1)
    sx = np.clip(xx + u, 0, w - 1)
    return ndimage.map_coordinates(img, [sy, sx], order=1, mode="nearest")


def _hs_increment(a, b, alpha, iterations):
    """Horn-Schunck flow between two aligned images, from zero init."""
    ix = ndimage.sobel(0.5 * (a + b), axis=1, mode="nearest") / 8.0
    iy = ndimage.sobel(0.5 * (a + b), axis=0, mode="nearest") / 8.0
    it = b - a
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    den = alpha * alpha + ix * ix + iy * iy
    for _ in range(iterations):
        ubar = ndimage.convolve(u, _HS_KERNEL, mode="nearest")
        vbar = ndimage.convolve(v, _HS_KERNEL, mode="nearest")
        t = (ix * ubar + iy * vbar + it) / den
        u = ubar - ix * t
        v = vbar - iy * t
    return u, v


def compute_flow(
    frame_a: Frame,
    frame_b: Frame,
    levels: int | None = None,
    iterations: int = 120,
    alpha: float = 15.0,
) -> FlowField:
    """Forward flow from ``frame_a`` to ``frame_b`` on the luma channel.

    Coarse-to-fine estimation with warping between pyramid levels; at
    least 3 levels whenever the frames allow it.
    """
    if frame_a.shape != frame_b.shape:
        raise DimensionMismatch("frames must share dimensions")
    a = frame_a.data[..., 0].astype(np.float64)
    b = frame_b.data[..., 0].astype(np.float64)
    if levels is None:
        levels = 3
        while min(a.shape) // 2 ** levels >= 12:
            levels += 1
    pyr_a, pyr_b = [a], [b]
    for _ in range(levels - 1):
        if min(pyr_a[-1].shape) < 8:
            break
        pyr_a.append(_downsample(pyr_a[-1]))
        pyr_b.append(_downsample(pyr_b[-1]))

    u = np.zeros_like(pyr_a[-1])
    v = np.zeros_like(pyr_a[-1])
    for lvl in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[lvl], pyr_b[lvl]
        if u.shape != la.shape:
            zy = la.shape[0] / u.shape[0]
            zx = la.shape[1] / u.shape[1]
            u = ndimage.zoom(u, (zy, zx), order=1) * zx
            v = ndimage.zoom(v, (zy, zx), order=1) * zy
        warped = _warp(lb, u, v)
        du, dv = _hs_increment(la, warped, alpha, iterations)
        u = u + du
        v = v + dv
    return FlowField(np.stack([u, v], axis=-1).astype(np.float32))


def save_flo(field: FlowField, path: str | Path):
    """Write a Middlebury .flo file (little-endian, row-major u,v pairs)."""
    h, w = field.shape
    with open(path, "wb") as fh:
        fh.write(_FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        data = field.vectors.astype("<f4")
        fh.write(data.tobytes())


def load_flo(path: str | Path) -> FlowField:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedFile(f"{path}: too short for a .flo header")
    if raw[:4] != _FLO_MAGIC:
        raise BadMagic(f"{path}: bad magic {raw[:4]!r}")
    w, h = struct.unpack("<ii", raw[4:12])
    expected = 12 + 8 * w * h
    if len(raw) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(raw)}")
    vec = np.frombuffer(raw[12:expected], dtype="<f4").reshape(h, w, 2)
    return FlowField(vec.copy())


def mean_superpixel_flow(
    decomp: SuperpixelDecomposition, field: FlowField
) -> SuperpixelFlow:
    """Arithmetic mean of member pixels' displacements per superpixel."""
    if decomp.shape != field.shape:
        raise DimensionMismatch("decomposition and flow dimensions differ")
    flat = decomp.assignment.ravel() - 1
    n = decomp.n
    sums = np.stack(
        [
            np.bincount(flat, weights=field.u.ravel().astype(np.float64), minlength=n),
            np.bincount(flat, weights=field.v.ravel().astype(np.float64), minlength=n),
        ],
        axis=1,
    )
    return SuperpixelFlow(sums / decomp.sizes[:, None])
