"""Region overlap metrics and sequence-level reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, LengthMismatch
from .imgcore import LabelMap


def _counts(pred: LabelMap, gt: LabelMap, k: int) -> tuple[int, int, int]:
    if pred.shape != gt.shape:
        raise DimensionMismatch("prediction and ground truth dimensions differ")
    p = pred.labels == k
    g = gt.labels == k
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return tp, fp, fn


def iou(pred: LabelMap, gt: LabelMap, k: int = 1) -> float:
    """Intersection over union for object ``k``; 1.0 when both are empty."""
    tp, fp, fn = _counts(pred, gt, k)
    denom = tp + fp + fn
    return 1.0 if denom == 0 else tp / denom


def f1(pred: LabelMap, gt: LabelMap, k: int = 1) -> float:
    """Precision/recall harmonic mean for object ``k``; 1.0 when both empty."""
    tp, fp, fn = _counts(pred, gt, k)
    if tp + fp + fn == 0:
        return 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class FrameScore:
    t: int
    iou: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_object: dict


def frame_score(pred: LabelMap, gt: LabelMap, t: int = 0) -> FrameScore:
    """Scores for one frame; multi-object maps average over objects."""
    ks = sorted(set(gt.object_ids()) | set(pred.object_ids())) or [1]
    per = {}
    tp = fp = fn = 0
    for k in ks:
        c = _counts(pred, gt, k)
        tp, fp, fn = tp + c[0], fp + c[1], fn + c[2]
        per[k] = {"iou": iou(pred, gt, k), "f1": f1(pred, gt, k)}
    mean_iou = float(np.mean([v["iou"] for v in per.values()]))
    mean_f1 = float(np.mean([v["f1"] for v in per.values()]))
    return FrameScore(t, mean_iou, mean_f1, tp, fp, fn, per)


def sequence_report(
    preds: list[LabelMap],
    gts: list[LabelMap],
    correction_log: list[dict] | None = None,
    sequence: str = "",
    mode: str = "",
    config: dict | None = None,
    t_offset: int = 0,
) -> dict:
    """Aligned per-frame scores plus correction-effort columns.

    ``correction_log`` entries are ``{"t": ..., "markers": ..., "seconds":
    ...}`` dicts; frames absent from the log count zero effort.
    """
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(gts)} ground truths")
    markers: dict[int, int] = {}
    seconds: dict[int, float] = {}
    for entry in correction_log or []:
        t = int(entry["t"])
        markers[t] = markers.get(t, 0) + int(entry.get("markers", 0))
        seconds[t] = seconds.get(t, 0.0) + float(entry.get("seconds", 0.0))
    frames = []
    for i, (p, g) in enumerate(zip(preds, gts)):
        t = i + t_offset
        s = frame_score(p, g, t)
        frames.append(
            {
                "t": t,
                "iou": s.iou,
                "f1": s.f1,
                "tp": s.tp,
                "fp": s.fp,
                "fn": s.fn,
                "markers": markers.get(t, 0),
                "seconds": seconds.get(t, 0.0),
                "objects": s.per_object,
            }
        )
    n = len(frames)
    corrected = sum(1 for f in frames if f["markers"] > 0)
    return {
        "sequence": sequence,
        "mode": mode,
        "config": config or {},
        "frames": frames,
        "mean_iou": float(np.mean([f["iou"] for f in frames])) if n else 0.0,
        "mean_f1": float(np.mean([f["f1"] for f in frames])) if n else 0.0,
        "frames_corrected_fraction": corrected / n if n else 0.0,
    }


def save_report(report: dict, path: str | Path):
    Path(path).write_text(json.dumps(report, indent=2))
