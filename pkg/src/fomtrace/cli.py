"""Command-line entry points: segment, eval, serve, make-demo, segtrack."""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import metrics, pipeline
from .errors import EmptyInitialMask, FomtraceError, LengthMismatch, TooFewFrames
from .imgcore import MASK_PATTERN, LabelMap, load_label, load_sequence, save_label

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_RUNTIME = 3


def _config_from_args(ns) -> pipeline.SessionConfig:
    base = {}
    if getattr(ns, "config", None):
        base = json.loads(Path(ns.config).read_text())
    overrides = {
        "mode": ns.mode,
        "gamma": getattr(ns, "gamma", None),
        "window": getattr(ns, "window", None),
        "grid_step": getattr(ns, "grid_step", None),
    }
    for k, v in overrides.items():
        if v is not None:
            base[k] = v
    return pipeline.SessionConfig.from_dict(base)


def _run_segment(frames_dir, init_mask, config, out_dir, flow_dir=None) -> int:
    frames = load_sequence(frames_dir)
    l0 = load_label(init_mask)
    session = pipeline.init_session(frames, l0, config, flow_dir=flow_dir)
    preds = pipeline.run_uninterrupted(session)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for t, lab in enumerate(preds, start=1):
        save_label(lab, out / (MASK_PATTERN % t))
    return len(preds)


def cmd_segment(ns) -> int:
    try:
        config = _config_from_args(ns)
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        n = _run_segment(ns.frames, ns.init_mask, config, ns.out, ns.flow_dir)
    except (FileNotFoundError, ValueError, EmptyInitialMask, TooFewFrames) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {n} masks to {ns.out}")
    return EXIT_OK


def _sorted_masks(directory) -> list[Path]:
    return sorted(Path(directory).glob("mask_*.png"))


def cmd_eval(ns) -> int:
    pred_paths = _sorted_masks(ns.pred)
    gt_paths = _sorted_masks(ns.gt)
    if not pred_paths or len(pred_paths) != len(gt_paths):
        print(
            f"error: sequence length mismatch ({len(pred_paths)} vs {len(gt_paths)})",
            file=sys.stderr,
        )
        return EXIT_BAD_INPUT
    preds = [load_label(p) for p in pred_paths]
    gts = [load_label(p) for p in gt_paths]
    log = json.loads(Path(ns.log).read_text()) if ns.log else None
    t0 = int(pred_paths[0].stem.split("_")[1])
    try:
        report = metrics.sequence_report(
            preds, gts, log, sequence=str(ns.pred), t_offset=t0
        )
    except LengthMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    metrics.save_report(report, ns.out)
    print(f"mean_iou={report['mean_iou']:.4f}")
    return EXIT_OK


def cmd_serve(ns) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(ns.data)
    uvicorn.run(app, host=ns.host, port=ns.port, log_level="warning")
    return EXIT_OK


def cmd_make_demo(ns) -> int:
    from . import synthetic

    seq = (
        synthetic.leak_sequence(ns.frames_count)
        if ns.leak
        else synthetic.disk_sequence(n_frames=ns.frames_count)
    )
    synthetic.write_sequence(seq, ns.out, with_gt=True)
    print(f"wrote {len(seq)} frames to {ns.out} (ground truth in {ns.out}/gt)")
    return EXIT_OK


def _import_segtrack_video(root: Path, video: str, workdir: Path) -> tuple[Path, Path]:
    """Convert one SegTrackv2-layout video into the toolkit's file layout.

    Handles both flat ground-truth directories and per-object
    subdirectories (merged into one multi-label mask).
    """
    frames_src = root / "JPEGImages" / video
    gt_src = root / "GroundTruth" / video
    if not frames_src.is_dir() or not gt_src.is_dir():
        raise FileNotFoundError(f"no JPEGImages/GroundTruth for video {video!r}")
    exts = {".png", ".jpg", ".jpeg", ".bmp"}
    frame_files = sorted(p for p in frames_src.iterdir() if p.suffix.lower() in exts)
    if not frame_files:
        raise FileNotFoundError(f"no frames under {frames_src}")
    frames_dir = workdir / "frames"
    gt_dir = workdir / "gt"
    frames_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    for t, p in enumerate(frame_files):
        Image.open(p).convert("RGB").save(frames_dir / ("frame_%05d.png" % t))

    obj_dirs = sorted(p for p in gt_src.iterdir() if p.is_dir())
    if obj_dirs:
        per_obj = []
        for d in obj_dirs:
            per_obj.append(sorted(p for p in d.iterdir() if p.suffix.lower() in exts))
        n = min(len(files) for files in per_obj)
        for t in range(n):
            lab = None
            for k, files in enumerate(per_obj, start=1):
                m = np.asarray(Image.open(files[t]).convert("L")) > 127
                if lab is None:
                    lab = np.zeros(m.shape, dtype=np.int32)
                lab[m] = k
            save_label(LabelMap(lab), gt_dir / (MASK_PATTERN % t))
    else:
        gt_files = sorted(p for p in gt_src.iterdir() if p.suffix.lower() in exts)
        for t, p in enumerate(gt_files):
            m = np.asarray(Image.open(p).convert("L")) > 127
            save_label(LabelMap(m.astype(np.int32)), gt_dir / (MASK_PATTERN % t))
    return frames_dir, gt_dir


def cmd_segtrack(ns) -> int:
    try:
        config = _config_from_args(ns)
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = Path(ns.out)
    try:
        frames_dir, gt_dir = _import_segtrack_video(Path(ns.root), ns.video, out / "work")
        n = _run_segment(
            frames_dir, gt_dir / (MASK_PATTERN % 0), config, out / "pred", ns.flow_dir
        )
    except (FileNotFoundError, ValueError, FomtraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    # Align ground truth with the predictions (frames 1..n).
    gt_eval = out / "gt_eval"
    gt_eval.mkdir(parents=True, exist_ok=True)
    for t in range(1, n + 1):
        src = gt_dir / (MASK_PATTERN % t)
        if not src.exists():
            print(f"error: ground truth missing frame {t}", file=sys.stderr)
            return EXIT_BAD_INPUT
        shutil.copy(src, gt_eval / (MASK_PATTERN % t))
    ns2 = argparse.Namespace(
        pred=out / "pred", gt=gt_eval, log=None, out=out / "report.json"
    )
    return cmd_eval(ns2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fomtrace", description="Interactive video segmentation toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment a sequence without interaction")
    seg.add_argument("--frames", required=True, help="directory of frame_%%05d.png")
    seg.add_argument("--init-mask", required=True, help="first-frame label PNG")
    seg.add_argument("--mode", choices=pipeline.MODES, default=None)
    seg.add_argument("--out", required=True, help="output mask directory")
    seg.add_argument("--gamma", type=float, default=None)
    seg.add_argument("--window", type=int, default=None)
    seg.add_argument("--grid-step", dest="grid_step", type=int, default=None)
    seg.add_argument("--flow-dir", dest="flow_dir", default=None)
    seg.add_argument("--config", default=None, help="JSON config file")
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--log", default=None, help="correction log JSON")
    ev.add_argument("--out", required=True, help="report JSON path")
    ev.set_defaults(func=cmd_eval)

    srv = sub.add_parser("serve", help="run the HTTP session service")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--data", required=True, help="session/data directory")
    srv.add_argument("--host", default="127.0.0.1")
    srv.set_defaults(func=cmd_serve)

    demo = sub.add_parser("make-demo", help="write a synthetic demo sequence")
    demo.add_argument("--out", required=True)
    demo.add_argument("--frames", dest="frames_count", type=int, default=8)
    demo.add_argument("--leak", action="store_true")
    demo.set_defaults(func=cmd_make_demo)

    st = sub.add_parser("segtrack", help="run on a SegTrackv2-format directory tree")
    st.add_argument("--root", required=True, help="tree with JPEGImages/ GroundTruth/")
    st.add_argument("--video", required=True)
    st.add_argument("--mode", choices=pipeline.MODES, default=None)
    st.add_argument("--out", required=True)
    st.add_argument("--gamma", type=float, default=None)
    st.add_argument("--window", type=int, default=None)
    st.add_argument("--grid-step", dest="grid_step", type=int, default=None)
    st.add_argument("--flow-dir", dest="flow_dir", default=None)
    st.add_argument("--config", default=None)
    st.set_defaults(func=cmd_segtrack)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
