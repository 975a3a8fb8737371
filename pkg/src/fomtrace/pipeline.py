"""Session state machine: predict, model, refine, correct, accept.

A session owns one video plus the user's accepted masks. Each step
re-runs windowed video segmentation seeded from the previous accepted
mask, derives the object model (mode permitting), and refines the current
frame on its pixel graph. The user may correct with scribbles any number
of times before accepting; accepting freezes the frame and moves on.
``run_uninterrupted`` drives the same machinery with no corrections for
benchmark runs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import fom, videoseg
from .errors import (
    EmptyInitialMask,
    EmptyObjectSeeds,
    NoForegroundSeeds,
    NoSeeds,
    NothingToAccept,
    TooFewFrames,
)
from .flow import FlowField, compute_flow, load_flo, mean_superpixel_flow
from .imgcore import (
    Frame,
    LabelMap,
    SeedPixels,
    load_label,
    load_sequence,
    merge_seeds,
    save_label,
    seed_pixels_from_label,
)
from .superpix import SuperpixelDecomposition, slico

MODES = ("spift", "fomtrace", "fomtracew")

FLOW_PATTERN = "flow_%05d.flo"


@dataclass
class SessionConfig:
    mode: str = "fomtrace"
    gamma: float = 0.6
    window: int = 30
    grid_step: int = 5
    rho_e: int = 2
    rho_d: int = 3
    alpha_f: float = 3.0
    alpha_b: float = -2.0
    slic_iterations: int = 10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.grid_step < 2:
            raise ValueError("grid_step must be >= 2")
        if self.rho_e < 0 or self.rho_d < 0:
            raise ValueError("erosion/dilation radii must be >= 0")
        if not self.alpha_b < 0 < self.alpha_f:
            raise ValueError("alpha_b must be negative, alpha_f positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


class SequenceCache:
    """Lazily computed superpixels and flows for one frame sequence.

    Sidecar ``.flo`` files under ``flow_dir`` take precedence over the
    built-in flow estimator. A cache may be shared by several sessions of
    the same video.
    """

    def __init__(self, frames: list[Frame], config: SessionConfig, flow_dir=None):
        self.frames = frames
        self.config = config
        self.flow_dir = Path(flow_dir) if flow_dir else None
        self._decomps: list[SuperpixelDecomposition | None] = [None] * len(frames)
        self._flows: list[FlowField | None] = [None] * len(frames)

    def decomp(self, t: int) -> SuperpixelDecomposition:
        if self._decomps[t] is None:
            self._decomps[t] = slico(
                self.frames[t], self.config.grid_step, self.config.slic_iterations
            )
        return self._decomps[t]

    def flowfield(self, t: int) -> FlowField:
        """Forward flow mapping frame t toward frame t+1."""
        if self._flows[t] is None:
            if self.flow_dir is not None:
                p = self.flow_dir / (FLOW_PATTERN % t)
                if p.exists():
                    f = load_flo(p)
                    if f.shape == self.frames[t].shape:
                        self._flows[t] = f
                        return f
            self._flows[t] = compute_flow(self.frames[t], self.frames[t + 1])
        return self._flows[t]

    def decomps(self) -> list:
        return self._decomps

    def flows(self) -> list:
        return self._flows


@dataclass
class SessionState:
    frames: list[Frame]
    config: SessionConfig
    cache: SequenceCache
    t: int = 1
    accepted: dict = field(default_factory=dict)
    refined: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    model_seed_cache: dict = field(default_factory=dict)
    scribbles: dict = field(default_factory=dict)
    log: list = field(default_factory=list)
    paused: bool = False

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def done(self) -> bool:
        return self.t > self.n_frames - 1


def init_session(
    frames,
    l0: LabelMap,
    config: SessionConfig | None = None,
    flow_dir=None,
    cache: SequenceCache | None = None,
) -> SessionState:
    """Start a session from a frame sequence and a first-frame mask.

    ``frames`` is a list of Frames or a directory of frame_%05d.png files.
    A prebuilt :class:`SequenceCache` may be passed to share superpixel and
    flow computations across sessions of the same video.
    """
    if isinstance(frames, (str, Path)):
        frames = load_sequence(frames)
    if len(frames) < 2:
        raise TooFewFrames("need at least two frames")
    if not (l0.labels > 0).any():
        raise EmptyInitialMask("the first-frame mask contains no object pixels")
    if l0.shape != frames[0].shape:
        raise EmptyInitialMask("mask dimensions do not match the frames")
    config = config or SessionConfig()
    if config.grid_step > min(frames[0].shape):
        raise ValueError("grid_step exceeds the frame size")
    if cache is None:
        cache = SequenceCache(frames, config, flow_dir)
    state = SessionState(frames=frames, config=config, cache=cache)
    state.accepted[0] = l0
    return state


def _window_of(state: SessionState, t_start: int) -> tuple[int, int]:
    return t_start, min(t_start + state.config.window, state.n_frames - 1)


def _predict_window(state: SessionState, t_start: int) -> list[LabelMap]:
    """Windowed graph prediction seeded from the accepted mask at t_start.

    Returns predicted labels for frames t_start+1 .. window end.
    """
    cfg = state.config
    t0, t1 = _window_of(state, t_start)
    for t in range(t0, t1 + 1):
        state.cache.decomp(t)
    for t in range(t0, t1):
        state.cache.flowfield(t)
    try:
        seeds = videoseg.superpixel_seeds_from_label(
            state.accepted[t0], state.cache.decomp(t0), cfg.rho_e, cfg.rho_d
        )
    except EmptyObjectSeeds:
        # Small objects may vanish under erosion; retry keeping every
        # object pixel as interior evidence.
        seeds = videoseg.superpixel_seeds_from_label(
            state.accepted[t0], state.cache.decomp(t0), 0, cfg.rho_d
        )
    graph = videoseg.build_graph(
        state.frames, state.cache.decomps(), state.cache.flows(), (t0, t1)
    )
    return videoseg.predict_labels(graph, seeds, state.cache.decomps())


def _empty_label(state: SessionState) -> LabelMap:
    return LabelMap(np.zeros(state.frames[0].shape, dtype=np.int32))


def step(state: SessionState) -> LabelMap:
    """Predict and refine the current frame; does not advance the session."""
    t = state.t
    if state.done:
        raise NothingToAccept("session already finished")
    if t - 1 not in state.accepted:
        raise NothingToAccept(f"no accepted mask for frame {t - 1}")
    preds = _predict_window(state, t - 1)
    l_hat = preds[0]
    state.predicted[t] = l_hat

    cfg = state.config
    if cfg.mode == "spift":
        state.refined[t] = l_hat
        state.paused = False
        return l_hat

    decomp_prev = state.cache.decomp(t - 1)
    spflow = mean_superpixel_flow(decomp_prev, state.cache.flowfield(t - 1))
    l_tilde = fom.propagate_label(state.accepted[t - 1], decomp_prev, spflow)
    if cfg.mode == "fomtrace":
        w_tilde = np.full(l_hat.shape, 0.5)
        gamma = None
    else:
        w_tilde = fom.weight_image(
            state.frames[t - 1], state.accepted[t - 1], decomp_prev, spflow
        )
        gamma = cfg.gamma
    model = fom.build_fuzzy_model(l_tilde, l_hat, w_tilde, gamma)
    state.models[t] = model
    try:
        seeds = fom.model_seeds(model, cfg.alpha_f, cfg.alpha_b)
    except NoForegroundSeeds:
        state.paused = True
        state.refined[t] = _empty_label(state)
        return state.refined[t]
    state.model_seed_cache[t] = seeds
    refined, _ = fom.refine(state.frames[t], seeds)
    state.refined[t] = refined
    state.paused = False
    return refined


def _base_seeds_for_correction(state: SessionState, t: int) -> SeedPixels:
    if t in state.model_seed_cache:
        return state.model_seed_cache[t]
    # No model (plain prediction mode, or a paused step): derive interior
    # and exterior seeds from the current refined mask so scribbles have
    # competitors.
    base = state.refined[t]
    if (base.labels > 0).any():
        try:
            return seed_pixels_from_label(base, state.config.rho_e, state.config.rho_d)
        except EmptyObjectSeeds:
            return seed_pixels_from_label(base, 0, state.config.rho_d)
    ys, xs = np.nonzero(base.labels == 0)
    return SeedPixels(ys, xs, np.zeros(ys.size, dtype=np.int32))


def correct(
    state: SessionState,
    scribbles: SeedPixels,
    elapsed: float,
    markers: int | None = None,
) -> LabelMap:
    """Merge scribbles with the frame's seeds and re-refine.

    Scribbles win over model seeds at shared pixels; every call appends a
    correction-log entry with the marker count and wall-clock seconds.
    """
    t = state.t
    if t not in state.refined:
        raise NothingToAccept("correct requires a stepped frame")
    if markers is None:
        markers = 1 if len(scribbles) else 0
    if len(scribbles):
        scribbles.check_domain(state.frames[t].shape)
        state.scribbles.setdefault(t, []).append(scribbles)
    state.log.append(
        {"t": t, "markers": int(markers), "seconds": float(elapsed), "mode": state.config.mode}
    )
    strokes = state.scribbles.get(t, [])
    if not strokes:
        return state.refined[t]
    merged = strokes[0]
    for s in strokes[1:]:
        merged = merge_seeds(merged, s)
    base = _base_seeds_for_correction(state, t)
    refined, _ = fom.refine(state.frames[t], base, merged)
    state.refined[t] = refined
    state.paused = False
    return refined


def accept(state: SessionState) -> int | None:
    """Freeze the current refined mask and advance; None when finished."""
    t = state.t
    if t not in state.refined:
        raise NothingToAccept(f"frame {t} has not been stepped")
    state.accepted[t] = state.refined[t]
    state.t = t + 1
    return None if state.done else state.t


def run_uninterrupted(state: SessionState) -> list[LabelMap]:
    """Benchmark protocol: segment every frame with no corrections.

    In plain prediction mode the window slides in whole-window hops and
    the graph labels are taken as-is; the model modes run the full
    step/accept loop. A vanished object yields empty masks for the
    remaining frames instead of aborting.
    """
    if state.t != 1 or state.log or state.refined:
        raise ValueError("run_uninterrupted requires a fresh session")
    nf = state.n_frames
    if state.config.mode == "spift":
        t0 = 0
        while t0 < nf - 1:
            try:
                preds = _predict_window(state, t0)
            except NoSeeds:
                for t in range(t0 + 1, nf):
                    state.accepted[t] = _empty_label(state)
                break
            t1 = _window_of(state, t0)[1]
            for i, t in enumerate(range(t0 + 1, t1 + 1)):
                state.accepted[t] = preds[i]
                state.refined[t] = preds[i]
                state.predicted[t] = preds[i]
            t0 = t1
        state.t = nf
        return [state.accepted[t] for t in range(1, nf)]

    while not state.done:
        step(state)
        if state.paused:
            for t in range(state.t, nf):
                state.accepted[t] = _empty_label(state)
            state.t = nf
            break
        accept(state)
    return [state.accepted[t] for t in range(1, nf)]


# ---------------------------------------------------------------------------
# Session persistence: config.json, log.json, accepted/, predicted/,
# refined/, models/.
# ---------------------------------------------------------------------------

MASK_PATTERN = "mask_%05d.png"


def save_session(state: SessionState, directory, frames_dir=None):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "config": state.config.to_dict(),
        "t": state.t,
        "n_frames": state.n_frames,
        "paused": state.paused,
        "frames_dir": str(frames_dir) if frames_dir else None,
    }
    (root / "config.json").write_text(json.dumps(meta, indent=2))
    (root / "log.json").write_text(json.dumps(state.log, indent=2))
    for name, store in (
        ("accepted", state.accepted),
        ("predicted", state.predicted),
        ("refined", state.refined),
    ):
        sub = root / name
        sub.mkdir(exist_ok=True)
        for t, lab in store.items():
            save_label(lab, sub / (MASK_PATTERN % t))
    if state.models:
        sub = root / "models"
        sub.mkdir(exist_ok=True)
        for t, model in state.models.items():
            fom.render_model_png(model, sub / ("model_%05d.png" % t))


def load_session(directory, frames=None) -> SessionState:
    """Restore a saved session; re-step the current frame to regenerate
    intermediates before correcting."""
    root = Path(directory)
    meta = json.loads((root / "config.json").read_text())
    config = SessionConfig.from_dict(meta["config"])
    if frames is None:
        if not meta.get("frames_dir"):
            raise ValueError("session did not record a frames directory")
        frames = load_sequence(meta["frames_dir"])
    if isinstance(frames, (str, Path)):
        frames = load_sequence(frames)
    cache = SequenceCache(frames, config)
    state = SessionState(frames=frames, config=config, cache=cache)
    state.t = int(meta["t"])
    state.paused = bool(meta.get("paused", False))
    log_path = root / "log.json"
    if log_path.exists():
        state.log = json.loads(log_path.read_text())
    for name, store in (
        ("accepted", state.accepted),
        ("predicted", state.predicted),
        ("refined", state.refined),
    ):
        sub = root / name
        if sub.exists():
            for p in sorted(sub.glob("mask_*.png")):
                t = int(p.stem.split("_")[1])
                store[t] = load_label(p)
    return state
