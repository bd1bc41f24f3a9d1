"""Pixel-level comparison of predicted and ground-truth moving-object masks."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class FrameMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    iou: float


@dataclass
class EvalReport:
    per_frame: list[FrameMetrics]
    mean_precision: float
    mean_recall: float
    mean_f1: float
    mean_iou: float
    frames_evaluated: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "frames_evaluated": self.frames_evaluated,
            "mean": {
                "precision": self.mean_precision,
                "recall": self.mean_recall,
                "f1": self.mean_f1,
                "iou": self.mean_iou,
            },
            "per_frame": [asdict(m) for m in self.per_frame],
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["frame", "tp", "fp", "fn", "precision", "recall", "f1", "iou"])
        for k, m in enumerate(self.per_frame):
            writer.writerow([k, m.tp, m.fp, m.fn, f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}", f"{m.iou:.6f}"])
        return buf.getvalue()


def frame_metrics(pred: np.ndarray, gt: np.ndarray, ignore: np.ndarray | None = None) -> FrameMetrics:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    if ignore is not None:
        if ignore.shape != pred.shape:
            raise DimensionMismatch(f"ignore {ignore.shape} vs masks {pred.shape}")
        keep = ~ignore
        pred = pred & keep
        gt = gt & keep
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    if tp + fp == 0:
        precision = 1.0 if tp + fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if tp + fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    union = tp + fp + fn
    iou = 1.0 if union == 0 else tp / union
    return FrameMetrics(tp, fp, fn, precision, recall, f1, iou)


def eval_masks(
    pred: Sequence[np.ndarray],
    gt: Sequence[np.ndarray],
    ignore: np.ndarray | Sequence[np.ndarray] | None = None,
) -> EvalReport:
    """Per-frame precision, recall, F1 and IoU plus their means.

    ``ignore`` (typically the FOE exclusion disc; one mask for all frames or one
    per frame) removes pixels from all counts.
    """
    if len(pred) != len(gt):
        raise DimensionMismatch(f"{len(pred)} predicted frames vs {len(gt)} ground-truth frames")
    if ignore is None or (isinstance(ignore, np.ndarray) and ignore.ndim == 2):
        ignores = [ignore] * len(pred)
    else:
        ignores = list(ignore)
        if len(ignores) != len(pred):
            raise DimensionMismatch(f"{len(ignores)} ignore masks for {len(pred)} frames")
    per = [frame_metrics(p, g, i) for p, g, i in zip(pred, gt, ignores)]
    n = len(per)

    def mean(attr: str) -> float:
        return float(np.mean([getattr(m, attr) for m in per])) if n else 0.0

    meta = {"ignored_pixels": [int(np.count_nonzero(i)) if i is not None else 0 for i in ignores]}
    if ignore is not None:
        meta["ignore_reason"] = "FOE exclusion zone: the detector makes no decision there"
    return EvalReport(per, mean("precision"), mean("recall"), mean("f1"), mean("iou"), n, meta)


def exclusion_mask(lookup) -> np.ndarray:
    """Pixels inside the lookup's FOE exclusion disc."""
    xs, ys = lookup.camera.pixel_grid()
    d = np.hypot(xs - lookup.foe.x, ys - lookup.foe.y)
    return ~((d > lookup.exclusion_radius_px) & (d > 0))
