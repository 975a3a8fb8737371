import numpy as np
import pytest

from fomtrace import fom, imgcore, metrics, pipeline, synthetic
from fomtrace.errors import EmptyInitialMask, NothingToAccept, TooFewFrames


def small_scene(n_frames=3, velocity=(2, 0)):
    return synthetic.disk_sequence(
        n_frames=n_frames, shape=(60, 80), radius=10, velocity=velocity, start=(24, 30)
    )


def new_session(seq, mode="fomtrace", cache=None, **kw):
    cfg = pipeline.SessionConfig(mode=mode, window=8, **kw)
    return pipeline.init_session(seq.frames, seq.gts[0], cfg, cache=cache)


@pytest.fixture(scope="module")
def scene():
    return small_scene()


@pytest.fixture(scope="module")
def shared_cache(scene):
    cfg = pipeline.SessionConfig(window=8)
    cache = pipeline.SequenceCache(scene.frames, cfg)
    for t in range(len(scene.frames)):
        cache.decomp(t)
    for t in range(len(scene.frames) - 1):
        cache.flowfield(t)
    return cache


def test_init_session_validations(scene):
    s = new_session(scene)
    assert s.t == 1 and 0 in s.accepted
    with pytest.raises(TooFewFrames):
        pipeline.init_session(scene.frames[:1], scene.gts[0])
    empty = imgcore.LabelMap(np.zeros((60, 80), np.int32))
    with pytest.raises(EmptyInitialMask):
        pipeline.init_session(scene.frames, empty)
    wrong = imgcore.LabelMap(np.ones((10, 10), np.int32))
    with pytest.raises(EmptyInitialMask):
        pipeline.init_session(scene.frames, wrong)


def test_step_fomtrace_quality(scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    out = pipeline.step(s)
    assert metrics.iou(out, scene.gts[1]) >= 0.9
    assert s.t == 1  # step does not advance
    assert 1 in s.models and 1 in s.predicted


def test_step_spift_is_prediction(scene, shared_cache):
    s = new_session(scene, mode="spift", cache=shared_cache)
    out = pipeline.step(s)
    assert np.array_equal(out.labels, s.predicted[1].labels)
    assert 1 not in s.models


def test_mode_consistency_constant_weight(scene, shared_cache, monkeypatch):
    # a constant 0.5 weight image with gamma > 0.5 must reproduce the
    # balanced-model mode exactly
    s1 = new_session(scene, mode="fomtrace", cache=shared_cache)
    a = pipeline.step(s1)
    monkeypatch.setattr(
        pipeline.fom, "weight_image", lambda *args, **kw: np.full((60, 80), 0.5)
    )
    s2 = new_session(scene, mode="fomtracew", gamma=0.6, cache=shared_cache)
    b = pipeline.step(s2)
    assert np.array_equal(a.labels, b.labels)


def test_accept_flow(scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    with pytest.raises(NothingToAccept):
        pipeline.accept(s)
    pipeline.step(s)
    frozen = s.refined[1]
    nxt = pipeline.accept(s)
    assert nxt == 2 and s.accepted[1] is frozen
    pipeline.step(s)
    assert pipeline.accept(s) is None  # t = n_f - 1 accepted -> Done
    assert s.done


def test_correct_empty_scribbles_idempotent(scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    out = pipeline.step(s)
    empty = imgcore.SeedPixels(np.zeros(0, int), np.zeros(0, int), np.zeros(0, int))
    out2 = pipeline.correct(s, empty, elapsed=1.0)
    assert out2 is out
    assert s.log[-1]["markers"] == 0 and s.log[-1]["seconds"] == 1.0


def _correction_scene():
    """A frame with the object disk plus a same-colored distant blob; the
    model mistakenly seeds the blob as foreground."""
    h, w = 48, 96
    rgb = np.empty((h, w, 3))
    rgb[:] = (70, 90, 160)
    yy, xx = np.mgrid[0:h, 0:w]
    disk = (yy - 24) ** 2 + (xx - 24) ** 2 <= 100
    blob = (np.abs(yy - 24) <= 6) & (np.abs(xx - 72) <= 6)
    rgb[disk | blob] = (200, 160, 60)
    frame = imgcore.to_ycbcr(rgb)
    gt = imgcore.LabelMap(disk.astype(np.int32))

    lab = imgcore.LabelMap((disk | blob).astype(np.int32))
    seeds = imgcore.seed_pixels_from_label(lab, 2, 3)
    frames = [frame, frame]
    cfg = pipeline.SessionConfig(window=4)
    state = pipeline.SessionState(
        frames=frames, config=cfg, cache=pipeline.SequenceCache(frames, cfg)
    )
    state.accepted[0] = gt
    refined, _ = fom.refine(frame, seeds)
    state.refined[1] = refined
    state.model_seed_cache[1] = seeds
    return state, gt, disk, blob


def test_correct_removes_false_positive_blob():
    state, gt, disk, blob = _correction_scene()
    assert (state.refined[1].labels[blob] == 1).all()  # the mistake is real
    ys, xs = np.nonzero(blob)
    scrib = imgcore.SeedPixels(ys, xs, np.zeros(ys.size, np.int32))
    out = pipeline.correct(state, scrib, elapsed=3.0, markers=1)
    assert (out.labels[blob] == 0).all()
    assert (out.labels[disk] == 1).mean() > 0.95
    assert state.log[-1] == {"t": 1, "markers": 1, "seconds": 3.0, "mode": "fomtrace"}


def test_correct_recovers_false_negative_hole():
    state, gt, disk, blob = _correction_scene()
    # remove all fg seeds: refined goes all-background inside the disk
    seeds = state.model_seed_cache[1]
    keep = seeds.labels == 0
    state.model_seed_cache[1] = imgcore.SeedPixels(
        seeds.ys[keep], seeds.xs[keep], seeds.labels[keep]
    )
    refined, _ = fom.refine(state.frames[1], state.model_seed_cache[1])
    state.refined[1] = refined
    assert (refined.labels[disk] == 0).all()
    scrib = imgcore.SeedPixels([24], [24], [1])
    out = pipeline.correct(state, scrib, elapsed=2.0)
    assert (out.labels[disk] == 1).mean() > 0.95


def test_correct_accumulates_scribbles():
    state, gt, disk, blob = _correction_scene()
    ys, xs = np.nonzero(blob)
    half = ys.size // 2
    pipeline.correct(
        state, imgcore.SeedPixels(ys[:half], xs[:half], np.zeros(half, np.int32)), 1.0
    )
    out = pipeline.correct(
        state,
        imgcore.SeedPixels(ys[half:], xs[half:], np.zeros(ys.size - half, np.int32)),
        1.0,
    )
    assert (out.labels[blob] == 0).all()
    assert len(state.log) == 2


def test_run_uninterrupted_two_identical_frames():
    seq = small_scene(n_frames=2, velocity=(0, 0))
    s = new_session(seq)
    preds = pipeline.run_uninterrupted(s)
    assert len(preds) == 1
    assert metrics.iou(preds[0], seq.gts[1]) >= 0.95


def test_run_uninterrupted_spift_windowed():
    seq = small_scene(n_frames=6)
    cfg = pipeline.SessionConfig(mode="spift", window=2)
    s = pipeline.init_session(seq.frames, seq.gts[0], cfg)
    preds = pipeline.run_uninterrupted(s)
    assert len(preds) == 5
    ious = [metrics.iou(p, g) for p, g in zip(preds, seq.gts[1:])]
    assert np.mean(ious) >= 0.8


def test_object_vanishes_pauses_and_degrades():
    # the object disappears after frame 0: prediction finds no object,
    # the propagated and predicted masks disagree everywhere on the disk,
    # so the model offers no interior seeds
    rng = np.random.default_rng(5)
    bg = rng.uniform(60, 70, (48, 64, 3))
    f0 = bg.copy()
    yy, xx = np.mgrid[0:48, 0:64]
    disk = (yy - 24) ** 2 + (xx - 32) ** 2 <= 64
    f0[disk] = (220, 40, 40)
    frames = [imgcore.to_ycbcr(f0)] + [imgcore.to_ycbcr(bg)] * 3
    l0 = imgcore.LabelMap(disk.astype(np.int32))
    s = pipeline.init_session(frames, l0, pipeline.SessionConfig(window=4))
    preds = pipeline.run_uninterrupted(s)
    assert len(preds) == 3
    assert all((p.labels == 0).all() for p in preds)
    assert s.paused


def test_step_locality_contract(scene):
    # frames beyond the window must not influence the step output
    cfg = pipeline.SessionConfig(window=1)
    seq_a = small_scene(n_frames=4)
    frames_b = list(seq_a.frames)
    rng = np.random.default_rng(9)
    frames_b[3] = imgcore.to_ycbcr(rng.uniform(0, 255, (60, 80, 3)))  # outside window
    sa = pipeline.init_session(seq_a.frames, seq_a.gts[0], cfg)
    sb = pipeline.init_session(frames_b, seq_a.gts[0], cfg)
    a = pipeline.step(sa)
    b = pipeline.step(sb)
    assert np.array_equal(a.labels, b.labels)


def test_accepted_immutable_after_advance(scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    pipeline.step(s)
    pipeline.accept(s)
    before = s.accepted[1].labels.copy()
    pipeline.step(s)
    empty = imgcore.SeedPixels(np.zeros(0, int), np.zeros(0, int), np.zeros(0, int))
    pipeline.correct(s, empty, 0.5)
    assert np.array_equal(s.accepted[1].labels, before)


def test_replay_determinism_small(scene):
    def run():
        s = new_session(scene)
        pipeline.step(s)
        scrib = imgcore.SeedPixels([5], [5], [0])
        pipeline.correct(s, scrib, 1.0)
        pipeline.accept(s)
        pipeline.step(s)
        pipeline.accept(s)
        return [s.accepted[t].labels for t in sorted(s.accepted)]

    a = run()
    b = run()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_save_and_load_session(tmp_path, scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    pipeline.step(s)
    pipeline.correct(s, imgcore.SeedPixels([3], [3], [0]), 2.0)
    pipeline.accept(s)
    pipeline.save_session(s, tmp_path / "sess")
    for sub in ("config.json", "log.json", "accepted", "predicted", "refined", "models"):
        assert (tmp_path / "sess" / sub).exists()
    back = pipeline.load_session(tmp_path / "sess", frames=scene.frames)
    assert back.t == s.t
    assert back.config.mode == s.config.mode
    assert sorted(back.accepted) == sorted(s.accepted)
    for t in s.accepted:
        assert np.array_equal(back.accepted[t].labels, s.accepted[t].labels)
    assert back.log == s.log


def test_run_uninterrupted_requires_fresh(scene, shared_cache):
    s = new_session(scene, cache=shared_cache)
    pipeline.step(s)
    with pytest.raises(ValueError):
        pipeline.run_uninterrupted(s)


def test_config_validation():
    with pytest.raises(ValueError):
        pipeline.SessionConfig(mode="bogus")
    with pytest.raises(ValueError):
        pipeline.SessionConfig(gamma=1.5)
    with pytest.raises(ValueError):
        pipeline.SessionConfig(window=0)
    with pytest.raises(ValueError):
        pipeline.SessionConfig(alpha_f=-3, alpha_b=-2)
    cfg = pipeline.SessionConfig()
    assert (cfg.gamma, cfg.window, cfg.grid_step) == (0.6, 30, 5)
    assert (cfg.rho_e, cfg.rho_d, cfg.alpha_f, cfg.alpha_b) == (2, 3, 3.0, -2.0)
    back = pipeline.SessionConfig.from_dict(cfg.to_dict())
    assert back == cfg


def test_flow_sidecar_preferred(tmp_path, scene):
    from fomtrace import flow as flowmod

    cfg = pipeline.SessionConfig(window=8)
    flow_dir = tmp_path / "flow"
    flow_dir.mkdir()
    sentinel = np.full((60, 80, 2), 1.25, np.float32)
    flowmod.save_flo(flowmod.FlowField(sentinel), flow_dir / "flow_00000.flo")
    cache = pipeline.SequenceCache(scene.frames, cfg, flow_dir=flow_dir)
    f = cache.flowfield(0)
    assert np.array_equal(f.vectors, sentinel)
    # frame 1 has no sidecar: computed instead
    f1 = cache.flowfield(1)
    assert f1.shape == (60, 80)
