import numpy as np
import pytest
from scipy import ndimage

from fomtrace import imgcore, superpix
from fomtrace.errors import FrameTooSmall

EIGHT = np.ones((3, 3), bool)


def check_partition(decomp):
    a = decomp.assignment
    assert a.min() == 1 and a.max() == decomp.n
    assert decomp.sizes.sum() == a.size
    counts = np.bincount(a.ravel() - 1, minlength=decomp.n)
    assert np.array_equal(counts, decomp.sizes)
    assert (counts > 0).all()
    for k in range(1, decomp.n + 1):
        _, ncomp = ndimage.label(a == k, structure=EIGHT)
        assert ncomp == 1, f"superpixel {k} has {ncomp} components"


def test_uniform_10x10_grid_step_5():
    f = imgcore.to_ycbcr(np.full((10, 10, 3), 90.0))
    d = superpix.slico(f, 5, 10)
    check_partition(d)
    assert d.n == 4
    # near-equal sizes up to boundary assignment ties
    assert d.sizes.sum() == 100
    assert d.sizes.min() >= 16 and d.sizes.max() <= 36


def test_degenerate_grid_step():
    f = imgcore.to_ycbcr(np.full((9, 13, 3), 50.0))
    d = superpix.slico(f, 9, 10)
    check_partition(d)
    assert d.n >= 1


def test_two_color_halves_no_span():
    rgb = np.zeros((20, 20, 3))
    rgb[:, :10] = (200, 30, 30)
    rgb[:, 10:] = (30, 30, 200)
    d = superpix.slico(imgcore.to_ycbcr(rgb), 5, 10)
    check_partition(d)
    left = set(np.unique(d.assignment[:, :10]))
    right = set(np.unique(d.assignment[:, 10:]))
    assert not left & right


def test_partition_random_frames():
    rng = np.random.default_rng(11)
    for _ in range(8):
        h = int(rng.integers(16, 48))
        w = int(rng.integers(16, 48))
        f = imgcore.to_ycbcr(rng.uniform(0, 255, (h, w, 3)))
        d = superpix.slico(f, 5, 6)
        check_partition(d)


def test_mean_color_and_centroid_consistency():
    rng = np.random.default_rng(12)
    f = imgcore.to_ycbcr(rng.uniform(0, 255, (30, 40, 3)))
    d = superpix.slico(f, 5, 10)
    flat = d.assignment.ravel() - 1
    means = np.stack(
        [
            np.bincount(flat, weights=f.data[..., c].ravel(), minlength=d.n)
            for c in range(3)
        ],
        axis=1,
    ) / d.sizes[:, None]
    assert np.abs(means - d.mean_colors).max() < 1e-6
    yy, xx = np.mgrid[0 : f.shape[0], 0 : f.shape[1]]
    cents = np.stack(
        [
            np.bincount(flat, weights=yy.ravel(), minlength=d.n),
            np.bincount(flat, weights=xx.ravel(), minlength=d.n),
        ],
        axis=1,
    ) / d.sizes[:, None]
    assert np.abs(cents - d.centroids).max() < 1e-6


def test_determinism():
    rng = np.random.default_rng(13)
    f = imgcore.to_ycbcr(rng.uniform(0, 255, (25, 33, 3)))
    a = superpix.slico(f, 5, 8)
    b = superpix.slico(f, 5, 8)
    assert np.array_equal(a.assignment, b.assignment)
    assert np.array_equal(a.mean_colors, b.mean_colors)


def test_frame_too_small():
    f = imgcore.to_ycbcr(np.zeros((4, 4, 3)))
    with pytest.raises(FrameTooSmall):
        superpix.slico(f, 5, 10)
    with pytest.raises(FrameTooSmall):
        superpix.slico(f, 1, 10)


def test_debug_exports(tmp_path):
    rng = np.random.default_rng(14)
    rgb = rng.integers(0, 256, (20, 20, 3)).astype(np.uint8)
    f = imgcore.to_ycbcr(rgb.astype(np.float64))
    d = superpix.slico(f, 5, 5)
    superpix.save_assignment_png(d, tmp_path / "a.png")
    superpix.save_boundary_png(d, rgb, tmp_path / "b.png")
    from PIL import Image

    back = np.asarray(Image.open(tmp_path / "a.png"))
    assert np.array_equal(back, d.assignment.astype(np.uint16))
