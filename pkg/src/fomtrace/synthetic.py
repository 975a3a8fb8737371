"""Synthetic benchmark sequences: a textured disk moving over a textured
background, optionally with a background patch of the object's color that
drifts into the scene and grazes the object's path (a leak stressor).

Used by the test suite and by ``fomtrace make-demo``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imgcore import FRAME_PATTERN, MASK_PATTERN, Frame, LabelMap, save_label, to_ycbcr
from PIL import Image

BG_COLOR = (70, 90, 160)
DISK_COLOR = (200, 160, 60)


def _smooth_noise(rng, shape, sigma=1.5, amp=10.0):
    x = ndimage.gaussian_filter(rng.uniform(-1.0, 1.0, shape), sigma)
    peak = np.abs(x).max()
    return x * (amp / peak) if peak > 0 else x


@dataclass(frozen=True)
class SyntheticSequence:
    rgb: list[np.ndarray]  # (H, W, 3) uint8 per frame
    frames: list[Frame]
    gts: list[LabelMap]

    def __len__(self) -> int:
        return len(self.frames)


def disk_sequence(
    n_frames: int = 20,
    shape: tuple[int, int] = (120, 160),
    radius: int = 20,
    velocity: tuple[int, int] = (3, 0),
    start: tuple[int, int] = (30, 60),
    bg_pan: int = 0,
    leak_patch: bool = False,
    noise_amp: float = 10.0,
    seed: int = 7,
) -> SyntheticSequence:
    """Render a moving textured disk over a textured background.

    ``velocity`` and ``start`` are (x, y). ``bg_pan`` shifts the whole
    background left by that many pixels per frame (a panning camera).
    ``leak_patch`` paints a feathered rectangle of the disk's exact color
    onto the background just right of the initial view, so it slides in
    and brushes the disk's path late in the sequence.
    """
    h, w = shape
    vx, vy = velocity
    cx0, cy0 = start
    rng = np.random.default_rng(seed)

    field_w = w + bg_pan * n_frames + 40
    bg = np.empty((h, field_w, 3))
    for c, base in enumerate(BG_COLOR):
        bg[..., c] = base + _smooth_noise(rng, (h, field_w), amp=noise_amp)

    if leak_patch:
        # Patch core shares the disk's color; left/top/right edges feather
        # over 3 px, the bottom edge (facing the path) stays sharp.
        px0, px1 = w + 4, w + 30
        py0, py1 = 12, 46
        yy, xx = np.mgrid[0:h, 0:field_w]
        fl = (xx - px0 + 1) / 3.0
        fr = (px1 - xx) / 3.0
        ft = (yy - py0 + 1) / 3.0
        alpha = np.clip(np.minimum(np.minimum(fl, fr), ft), 0.0, 1.0)
        alpha[(yy < py0) | (yy >= py1) | (xx < px0) | (xx >= px1)] = 0.0
        ptex = _smooth_noise(rng, (h, field_w), amp=noise_amp)
        for c, base in enumerate(DISK_COLOR):
            bg[..., c] = bg[..., c] * (1 - alpha) + (base + ptex) * alpha

    dtex_sz = 2 * radius + 8
    dtex = np.empty((dtex_sz, dtex_sz, 3))
    for c, base in enumerate(DISK_COLOR):
        dtex[..., c] = base + _smooth_noise(rng, (dtex_sz, dtex_sz), amp=noise_amp)

    rgbs, frames, gts = [], [], []
    yy, xx = np.mgrid[0:h, 0:w]
    for t in range(n_frames):
        img = bg[:, bg_pan * t : bg_pan * t + w].copy()
        cx = cx0 + vx * t
        cy = cy0 + vy * t
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius
        ly = np.clip(yy - cy + radius + 4, 0, dtex_sz - 1)
        lx = np.clip(xx - cx + radius + 4, 0, dtex_sz - 1)
        img[mask] = dtex[ly[mask], lx[mask]]
        rgb = np.clip(np.round(img), 0, 255).astype(np.uint8)
        rgbs.append(rgb)
        frames.append(to_ycbcr(rgb.astype(np.float64)))
        gts.append(LabelMap(mask.astype(np.int32)))
    return SyntheticSequence(rgbs, frames, gts)


def leak_sequence(n_frames: int = 30, seed: int = 7) -> SyntheticSequence:
    """A panning scene where a patch of the object's color drifts in from
    the right and grazes the disk's path near the end of the clip."""
    return disk_sequence(
        n_frames=n_frames,
        shape=(120, 160),
        radius=20,
        velocity=(3, 0),
        start=(30, 60),
        bg_pan=2,
        leak_patch=True,
        seed=seed,
    )


def write_sequence(seq: SyntheticSequence, directory, with_gt: bool = True):
    """Write frames (and optionally masks) in the standard layout."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for t, rgb in enumerate(seq.rgb):
        Image.fromarray(rgb, mode="RGB").save(root / (FRAME_PATTERN % t))
    if with_gt:
        gt_dir = root / "gt"
        gt_dir.mkdir(exist_ok=True)
        for t, lab in enumerate(seq.gts):
            save_label(lab, gt_dir / (MASK_PATTERN % t))
