"""Quantitative evaluation: event-level metrics, dwell histograms,
percent-removed curves, and bounding-box overlap utilities.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .detector import DetectorConfig, detect, pair_events
from .events import TRUTH_UNKNOWN, LabeledStream


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, half-open pixel ranges, annotated at time t (us)."""
    t: int
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError("box must have positive area")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class MetricReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    avg_po: float = 0.0
    avg_iou: float = 0.0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int,
                    avg_po: float = 0.0, avg_iou: float = 0.0) -> "MetricReport":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        return cls(tp, fp, fn, precision, recall, f1, avg_po, avg_iou)

    def as_text(self) -> str:
        return (f"tp={self.tp} fp={self.fp} fn={self.fn} "
                f"precision={self.precision:.4f} recall={self.recall:.4f} "
                f"f1={self.f1:.4f} avg_po={self.avg_po:.4f} avg_iou={self.avg_iou:.4f}")


def event_prf(pred: LabeledStream, positive_class: str = "snow") -> MetricReport:
    """Precision/recall/F1 of the per-event snow prediction against truth."""
    if positive_class not in ("snow", "background"):
        raise ValueError("positive_class must be 'snow' or 'background'")
    if len(pred) and np.any(pred.truth == TRUTH_UNKNOWN):
        raise ValueError("event_prf requires ground-truth flags on every event")
    truth_pos = pred.truth == 1
    pred_pos = pred.snow.astype(bool)
    if positive_class == "background":
        truth_pos = ~truth_pos
        pred_pos = ~pred_pos
    tp = int(np.count_nonzero(truth_pos & pred_pos))
    fp = int(np.count_nonzero(~truth_pos & pred_pos))
    fn = int(np.count_nonzero(truth_pos & ~pred_pos))
    return MetricReport.from_counts(tp, fp, fn)


def measured_dwells(stream: LabeledStream, cap_us: float,
                    omega_px: int = 0) -> np.ndarray:
    """Positive-to-negative inceptive gaps the pairing rule finds, up to a cap."""
    pairs = pair_events(stream, eta_us=cap_us, omega_px=omega_px)
    if not pairs:
        return np.zeros(0, np.int64)
    pos = np.asarray([i for i, _ in pairs])
    neg = np.asarray([j for _, j in pairs])
    return stream.t[neg].astype(np.int64) - stream.t[pos].astype(np.int64)


def dwell_histogram(stream: LabeledStream, cfg: DetectorConfig,
                    bins: int = 50, cap_us: Optional[float] = None):
    """Histogram of measured dwell times (thresholding disabled, capped).

    Returns (counts, bin_edges); counts sum to the number of pairs found.
    """
    if cap_us is None:
        cap_us = 100.0 * cfg.eta_us
    dwells = measured_dwells(stream, cap_us, cfg.omega_px)
    return np.histogram(dwells, bins=bins, range=(0.0, float(cap_us)))


def percent_removed_curve(stream: LabeledStream, eta_grid: Sequence[float],
                          cfg: DetectorConfig) -> List[Tuple[float, float]]:
    """Fraction of events flagged snow at each temporal threshold in the grid."""
    n = len(stream)
    out: List[Tuple[float, float]] = []
    for eta in eta_grid:
        if eta <= 0:
            out.append((float(eta), 0.0))
            continue
        labeled = detect(stream, DetectorConfig(eta_us=float(eta),
                                                omega_px=cfg.omega_px,
                                                expire_policy=cfg.expire_policy))
        out.append((float(eta), float(np.count_nonzero(labeled.snow)) / n if n else 0.0))
    return out


# ---------------------------------------------------------------------------
# Bounding-box utilities

def _intersection_area(a: BBox, b: BBox) -> int:
    w = min(a.x1, b.x1) - max(a.x0, b.x0)
    h = min(a.y1, b.y1) - max(a.y0, b.y0)
    return w * h if w > 0 and h > 0 else 0


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; symmetric, in [0, 1]."""
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def percent_overlap(det: BBox, gt: BBox) -> float:
    """Intersection area over ground-truth area (asymmetric)."""
    return _intersection_area(det, gt) / gt.area


def _in_exclusion(t: int, windows: Sequence[Tuple[float, float]]) -> bool:
    return any(lo <= t <= hi for lo, hi in windows)


def match_boxes(dets: Sequence[BBox], gts: Sequence[BBox], iou_min: float = 0.5,
                exclusion_windows: Sequence[Tuple[float, float]] = ()) -> MetricReport:
    """Greedy per-timestamp matching by descending IoU.

    Boxes inside any exclusion window (e.g. around wiper sweeps) are dropped
    before matching. Matched pairs with IoU >= iou_min count as true
    positives; the report averages PO and IoU over the matched pairs.
    """
    dets = [d for d in dets if not _in_exclusion(d.t, exclusion_windows)]
    gts = [g for g in gts if not _in_exclusion(g.t, exclusion_windows)]
    timestamps = sorted({b.t for b in dets} | {b.t for b in gts})
    tp = fp = fn = 0
    pos, ious = [], []
    for ts in timestamps:
        d_here = [d for d in dets if d.t == ts]
        g_here = [g for g in gts if g.t == ts]
        cands = sorted(
            ((iou(d, g), di, gi) for di, d in enumerate(d_here)
             for gi, g in enumerate(g_here)),
            key=lambda c: (-c[0], c[1], c[2]))
        used_d: set = set()
        used_g: set = set()
        for score, di, gi in cands:
            if di in used_d or gi in used_g or score < iou_min:
                continue
            used_d.add(di)
            used_g.add(gi)
            tp += 1
            pos.append(percent_overlap(d_here[di], g_here[gi]))
            ious.append(score)
        fp += len(d_here) - len(used_d)
        fn += len(g_here) - len(used_g)
    avg_po = float(np.mean(pos)) if pos else 0.0
    avg_iou = float(np.mean(ious)) if ious else 0.0
    return MetricReport.from_counts(tp, fp, fn, avg_po, avg_iou)


# ---------------------------------------------------------------------------
# Box CSV io: "t,x0,y0,x1,y1"

BOX_HEADER = ["t", "x0", "y0", "x1", "y1"]


def read_boxes(source) -> List[BBox]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as f:
            text = f.read()
    out = []
    reader = csv.reader(io.StringIO(text))
    for ln, row in enumerate(reader, start=1):
        if not row:
            continue
        if ln == 1 and row[0].strip() == "t":
            continue
        if len(row) != 5:
            raise ValueError(f"box line {ln}: expected 5 fields, got {len(row)}")
        t, x0, y0, x1, y1 = (int(v) for v in row)
        out.append(BBox(t, x0, y0, x1, y1))
    return out


def write_boxes(boxes: Iterable[BBox], destination) -> None:
    f = destination if hasattr(destination, "write") else open(destination, "w")
    try:
        writer = csv.writer(f)
        writer.writerow(BOX_HEADER)
        for b in boxes:
            writer.writerow([b.t, b.x0, b.y0, b.x1, b.y1])
    finally:
        if f is not destination:
            f.close()


def write_curve(points: Sequence[Tuple[float, float]], destination,
                header: Tuple[str, str] = ("eta_us", "fraction_removed")) -> None:
    """Emit an (x, y) curve as a two-column CSV for plotting."""
    f = destination if hasattr(destination, "write") else open(destination, "w")
    try:
        writer = csv.writer(f)
        writer.writerow(header)
        for xv, yv in points:
            writer.writerow([xv, yv])
    finally:
        if f is not destination:
            f.close()
