import numpy as np
import pytest

from fomtrace import imgcore
from fomtrace.errors import EmptyObjectSeeds


def test_ycbcr_gray_fixed_point():
    f = imgcore.to_ycbcr(np.full((2, 2, 3), 128.0))
    assert np.allclose(f.data, 128.0)


def test_ycbcr_black():
    f = imgcore.to_ycbcr(np.zeros((1, 1, 3)))
    assert np.allclose(f.data[0, 0], [0.0, 128.0, 128.0])


def test_ycbcr_red_hand_derived():
    # BT.601 full range evaluated by hand for pure red:
    # Y  = 0.299 * 255                = 76.245
    # Cb = 128 - 0.168736 * 255       = 84.97232
    # Cr = 128 + 0.5 * 255 = 255.5 -> clamped to 255
    rgb = np.zeros((1, 1, 3))
    rgb[0, 0, 0] = 255.0
    f = imgcore.to_ycbcr(rgb)
    assert abs(f.data[0, 0, 0] - 76.245) < 1e-9
    assert abs(f.data[0, 0, 1] - 84.97232) < 1e-9
    assert f.data[0, 0, 2] == 255.0


def test_to_rgb_roundtrip():
    rng = np.random.default_rng(3)
    rgb = rng.integers(0, 256, (16, 16, 3)).astype(np.float64)
    back = imgcore.to_rgb(imgcore.to_ycbcr(rgb))
    assert np.abs(back.astype(float) - rgb).max() <= 1.0


def test_frame_validation():
    with pytest.raises(ValueError):
        imgcore.Frame(np.full((2, 2, 3), 300.0))
    with pytest.raises(ValueError):
        imgcore.Frame(np.zeros((2, 2)))


def test_morph_dilate_single_pixel_disk29():
    mask = np.zeros((9, 9), bool)
    mask[4, 4] = True
    out = imgcore.morph_disk(mask, 3, "dilate")
    assert out.sum() == 29
    # matches the enumerated offsets dy^2+dx^2 <= 9
    expect = np.zeros((9, 9), bool)
    for dy, dx in imgcore.disk_offsets(3):
        expect[4 + dy, 4 + dx] = True
    assert np.array_equal(out, expect)


def test_morph_erode_single_pixel_empty():
    mask = np.zeros((7, 7), bool)
    mask[3, 3] = True
    assert not imgcore.morph_disk(mask, 2, "erode").any()


def test_morph_radius_zero_identity():
    rng = np.random.default_rng(0)
    mask = rng.random((12, 15)) < 0.5
    for mode in ("erode", "dilate"):
        assert np.array_equal(imgcore.morph_disk(mask, 0, mode), mask)


def test_morph_sandwich_and_monotonicity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.random((16, 16)) < 0.4
        b = a | (rng.random((16, 16)) < 0.2)  # a subset of b
        r = int(rng.integers(1, 4))
        er = imgcore.morph_disk(a, r, "erode")
        di = imgcore.morph_disk(a, r, "dilate")
        assert (er <= a).all() and (a <= di).all()
        for mode in ("erode", "dilate"):
            oa = imgcore.morph_disk(a, r, mode)
            ob = imgcore.morph_disk(b, r, mode)
            assert (oa <= ob).all()


def test_morph_border_is_background():
    mask = np.ones((6, 6), bool)
    er = imgcore.morph_disk(mask, 1, "erode")
    assert not er[0].any() and not er[-1].any()
    assert er[1:-1, 1:-1].all()


def test_seeds_all_background():
    lab = imgcore.LabelMap(np.zeros((8, 8), np.int32))
    seeds = imgcore.seed_pixels_from_label(lab, 2, 3)
    assert len(seeds) == 64
    assert (seeds.labels == 0).all()


def test_seeds_centered_square_bruteforce():
    lab = np.zeros((20, 20), np.int32)
    lab[5:15, 5:15] = 1
    seeds = imgcore.seed_pixels_from_label(imgcore.LabelMap(lab), 2, 3)
    # brute force: fg seed iff every offset within radius 2 stays inside
    offs2 = imgcore.disk_offsets(2)
    offs3 = imgcore.disk_offsets(3)
    fg = set()
    bg = set()
    for y in range(20):
        for x in range(20):
            if all(
                0 <= y + dy < 20 and 0 <= x + dx < 20 and lab[y + dy, x + dx] == 1
                for dy, dx in offs2
            ):
                fg.add((y, x))
            if not any(
                0 <= y + dy < 20 and 0 <= x + dx < 20 and lab[y + dy, x + dx] == 1
                for dy, dx in offs3
            ):
                bg.add((y, x))
    got_fg = {(y, x) for y, x, l in zip(seeds.ys, seeds.xs, seeds.labels) if l == 1}
    got_bg = {(y, x) for y, x, l in zip(seeds.ys, seeds.xs, seeds.labels) if l == 0}
    assert got_fg == fg == {(y, x) for y in range(7, 13) for x in range(7, 13)}
    assert got_bg == bg


def test_seeds_two_objects_disjoint_labels():
    lab = np.zeros((20, 30), np.int32)
    lab[4:12, 4:12] = 1
    lab[4:12, 18:26] = 2
    seeds = imgcore.seed_pixels_from_label(imgcore.LabelMap(lab), 2, 3)
    for y, x, l in zip(seeds.ys, seeds.xs, seeds.labels):
        if l > 0:
            assert lab[y, x] == l
    assert set(seeds.labels) == {0, 1, 2}


def test_seeds_empty_object_raises():
    lab = np.zeros((10, 10), np.int32)
    lab[5, 5] = 1
    with pytest.raises(EmptyObjectSeeds):
        imgcore.seed_pixels_from_label(imgcore.LabelMap(lab), 2, 3)
    # retrying with rho_e = 0 keeps the pixel
    seeds = imgcore.seed_pixels_from_label(imgcore.LabelMap(lab), 0, 3)
    assert (seeds.labels == 1).sum() == 1


def test_seeds_invariants_random():
    rng = np.random.default_rng(5)
    for _ in range(10):
        lab = np.zeros((24, 24), np.int32)
        lab[4:14, 4:14] = 1
        lab[16:23, 10:20] = 2
        try:
            seeds = imgcore.seed_pixels_from_label(imgcore.LabelMap(lab), 1, 2)
        except EmptyObjectSeeds:
            continue
        dil = imgcore.morph_disk(lab > 0, 2, "dilate")
        for y, x, l in zip(seeds.ys, seeds.xs, seeds.labels):
            if l == 0:
                assert not dil[y, x]
            else:
                assert lab[y, x] == l


def test_pixel_arc_weight_examples():
    data = np.zeros((1, 2, 3))
    f = imgcore.Frame(data.copy())
    assert imgcore.pixel_arc_weight(f, (0, 0), (0, 1)) == 0.0
    data[0, 0] = (10, 0, 0)
    data[0, 1] = (13, 4, 0)
    f = imgcore.Frame(data)
    assert imgcore.pixel_arc_weight(f, (0, 0), (0, 1)) == 5.0
    assert imgcore.pixel_arc_weight(f, (0, 1), (0, 0)) == 5.0


def test_pixel_weight_maps_bruteforce():
    rng = np.random.default_rng(9)
    f = imgcore.Frame(rng.uniform(0, 255, (8, 8, 3)))
    maps = imgcore.pixel_weight_maps(f)
    for (dy, dx), m in zip(imgcore.GRID_OFFSETS, maps):
        for y in range(8):
            for x in range(8):
                qy, qx = y + dy, x + dx
                if not (0 <= qy < 8 and 0 <= qx < 8):
                    continue
                my = y
                mx = x if dx >= 0 else x - 1
                expect = imgcore.pixel_arc_weight(f, (y, x), (qy, qx))
                assert abs(m[my, mx] - expect) < 1e-12


def test_label_png_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    lab = imgcore.LabelMap(rng.integers(0, 3, (9, 11)).astype(np.int32))
    p = tmp_path / "mask_00000.png"
    imgcore.save_label(lab, p)
    back = imgcore.load_label(p)
    assert np.array_equal(back.labels, lab.labels)


def test_frame_png_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    rgb = rng.integers(0, 256, (7, 5, 3)).astype(np.uint8)
    p = tmp_path / "frame_00000.png"
    imgcore.save_frame_rgb(rgb, p)
    f = imgcore.load_frame(p)
    assert np.allclose(f.data, imgcore.to_ycbcr(rgb.astype(np.float64)).data)


def test_sequence_paths_consecutive(tmp_path):
    rgb = np.zeros((4, 4, 3), np.uint8)
    for t in (0, 1, 2, 4):  # gap at 3
        imgcore.save_frame_rgb(rgb, tmp_path / (imgcore.FRAME_PATTERN % t))
    paths = imgcore.sequence_paths(tmp_path)
    assert len(paths) == 3


def test_merge_seeds_override():
    a = imgcore.SeedPixels([0, 1], [0, 1], [1, 1])
    b = imgcore.SeedPixels([1, 2], [1, 2], [0, 2])
    m = imgcore.merge_seeds(a, b)
    got = {(y, x): l for y, x, l in zip(m.ys, m.xs, m.labels)}
    assert got == {(0, 0): 1, (1, 1): 0, (2, 2): 2}


def test_seed_pixels_validation():
    with pytest.raises(ValueError):
        imgcore.SeedPixels([0, 0], [1, 1], [1, 2])  # duplicate coordinate
    s = imgcore.SeedPixels([0], [5], [1])
    with pytest.raises(ValueError):
        s.check_domain((4, 4))
