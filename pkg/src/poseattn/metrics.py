"""Binary classification metrics and detection average precision.

Divisions that would be 0/0 (no predicted positives, no actual positives)
score 0 by convention rather than raising.  Average precision follows the
all-point interpolation: sort detections by confidence, greedily match each
one to the best unmatched ground truth in its image at the IoU threshold,
accumulate precision/recall after every detection, take the area under the
monotone (right-to-left max) envelope.  Precision, recall, and the envelope
area are ratios of small integers, so AP is computed in exact rational
arithmetic and converted to float once at the end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

__all__ = ["ClassMetrics", "MetricsReport", "classification_report",
           "iou", "Detection", "GroundTruth", "average_precision", "mean_ap",
           "REPORT_CSV_COLUMNS"]

REPORT_CSV_COLUMNS = (
    "accuracy",
    "macro_precision", "macro_recall", "macro_f1",
    "weighted_precision", "weighted_recall", "weighted_f1",
)


@dataclass
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    support: int
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    accuracy: float
    per_class: dict[int, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    micro_f1: float
    per_class_ap: dict[str, float] | None = None
    map_score: float | None = None

    def to_json(self) -> str:
        doc = {
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall,
                      "f1": self.macro_f1},
            "weighted": {"precision": self.weighted_precision, "recall": self.weighted_recall,
                         "f1": self.weighted_f1},
            "micro_f1": self.micro_f1,
            "per_class": {
                str(c): {"precision": m.precision, "recall": m.recall, "f1": m.f1,
                         "support": m.support, "tp": m.tp, "fp": m.fp,
                         "fn": m.fn, "tn": m.tn}
                for c, m in sorted(self.per_class.items())
            },
        }
        if self.per_class_ap is not None:
            doc["per_class_ap"] = self.per_class_ap
        if self.map_score is not None:
            doc["map"] = self.map_score
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        values = [self.accuracy,
                  self.macro_precision, self.macro_recall, self.macro_f1,
                  self.weighted_precision, self.weighted_recall, self.weighted_f1]
        return (",".join(REPORT_CSV_COLUMNS) + "\n"
                + ",".join(repr(v) for v in values) + "\n")


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def classification_report(predictions: Sequence[int], labels: Sequence[int]
                          ) -> MetricsReport:
    """Accuracy plus per-class / macro / weighted precision, recall, and F1."""
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape or pred.ndim != 1:
        raise ValueError(f"predictions {pred.shape} and labels {lab.shape} must be equal-length vectors")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction list")
    if not (np.isin(pred, (0, 1)).all() and np.isin(lab, (0, 1)).all()):
        raise ValueError("predictions and labels must be binary (0 or 1)")

    n = pred.size
    per_class: dict[int, ClassMetrics] = {}
    tp_total = 0
    fp_total = 0
    fn_total = 0
    for c in (0, 1):
        tp = int(((pred == c) & (lab == c)).sum())
        fp = int(((pred == c) & (lab != c)).sum())
        fn = int(((pred != c) & (lab == c)).sum())
        tn = n - tp - fp - fn
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[c] = ClassMetrics(tp, fp, fn, tn, support=tp + fn,
                                    precision=precision, recall=recall, f1=f1)
        tp_total += tp
        fp_total += fp
        fn_total += fn

    accuracy = float((pred == lab).mean())
    macro = {k: float(np.mean([getattr(per_class[c], k) for c in (0, 1)]))
             for k in ("precision", "recall", "f1")}
    weighted = {k: sum(per_class[c].support / n * getattr(per_class[c], k) for c in (0, 1))
                for k in ("precision", "recall", "f1")}
    # one integer-ratio division keeps micro-F1 bit-identical to accuracy in
    # the single-label binary setting (2c/2n and c/n round to the same float)
    micro_f1 = _safe_div(2 * tp_total, 2 * tp_total + fp_total + fn_total)
    return MetricsReport(
        accuracy=accuracy, per_class=per_class,
        macro_precision=macro["precision"], macro_recall=macro["recall"],
        macro_f1=macro["f1"],
        weighted_precision=weighted["precision"], weighted_recall=weighted["recall"],
        weighted_f1=weighted["f1"], micro_f1=micro_f1,
    )


# -- boxes and detection AP ------------------------------------------------------


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two (x0, y0, x1, y1) rectangles.

    Disjoint or degenerate inputs give 0 rather than an error.
    """
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    inter = max(iw, 0.0) * max(ih, 0.0)
    area_a = max(ax1 - ax0, 0.0) * max(ay1 - ay0, 0.0)
    area_b = max(bx1 - bx0, 0.0) * max(by1 - by0, 0.0)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class Detection:
    image_id: int
    box: tuple
    confidence: float


@dataclass(frozen=True)
class GroundTruth:
    image_id: int
    box: tuple


def _greedy_tp_flags(detections: Sequence[Detection],
                     ground_truths: Sequence[GroundTruth],
                     iou_threshold: float) -> list[bool]:
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    matched: set[int] = set()
    flags = []
    for i in order:
        det = detections[i]
        best_j = -1
        best_iou = 0.0
        for j, gt in enumerate(ground_truths):
            if j in matched or gt.image_id != det.image_id:
                continue
            overlap = iou(det.box, gt.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_j = j
        if best_j >= 0:
            matched.add(best_j)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(detections: Sequence[Detection],
                      ground_truths: Sequence[GroundTruth],
                      iou_threshold: float = 0.5) -> float:
    """All-point-interpolated AP of a single class across images."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou threshold must lie in (0, 1], got {iou_threshold}")
    if not ground_truths or not detections:
        return 0.0
    flags = _greedy_tp_flags(detections, ground_truths, iou_threshold)
    n_gt = len(ground_truths)
    points = []
    tp = 0
    for k, is_tp in enumerate(flags, start=1):
        tp += int(is_tp)
        points.append((Fraction(tp, n_gt), Fraction(tp, k)))
    # right-to-left monotone envelope, integrated where recall steps up
    ap = Fraction(0)
    running = Fraction(0)
    envelope = [Fraction(0)] * len(points)
    for k in range(len(points) - 1, -1, -1):
        running = max(running, points[k][1])
        envelope[k] = running
    last_r = Fraction(0)
    for k, (r, _) in enumerate(points):
        if r > last_r:
            ap += (r - last_r) * envelope[k]
            last_r = r
    return float(ap)


def mean_ap(per_class_ap: Mapping[str, float]) -> float:
    """Arithmetic mean of per-class AP values; empty input is an error."""
    if not per_class_ap:
        raise ValueError("mean_ap needs at least one class AP")
    return float(np.mean(list(per_class_ap.values())))
