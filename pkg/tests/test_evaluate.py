import io

import numpy as np
import pytest

from evsnow.detector import DetectorConfig, detect
from evsnow.evaluate import (
    BBox,
    dwell_histogram,
    event_prf,
    iou,
    match_boxes,
    measured_dwells,
    percent_overlap,
    percent_removed_curve,
    read_boxes,
    write_boxes,
    write_curve,
)
from evsnow.events import CameraGeometry, LabeledStream
from evsnow.inceptive import FilterConfig, classify

from oracles import random_stream

GEOM = CameraGeometry(5.0, 1.0, 6, 6, 0.005, (3.0, 3.0))


def labeled(snow_pred, snow_truth):
    n = len(snow_pred)
    return LabeledStream(GEOM, list(range(n)), [0] * n, [0] * n, [1] * n,
                         snow=snow_pred, truth=[int(v) for v in snow_truth])


# ---------------------------------------------------------------------------
# Event-level metrics

def test_perfect_predictions():
    r = event_prf(labeled([True, False, True], [True, False, True]))
    assert r.precision == 1.0 and r.recall == 1.0 and r.f1 == 1.0


def test_all_background_predictions():
    r = event_prf(labeled([False, False], [True, False]))
    assert r.recall == 0.0 and r.tp == 0 and r.fn == 1


def test_background_positive_class():
    r = event_prf(labeled([True, False], [False, False]), "background")
    assert r.tp == 1 and r.fn == 1 and r.recall == 0.5


def test_missing_truth_rejected():
    s = LabeledStream(GEOM, [0], [0], [0], [1])  # truth stays unknown
    with pytest.raises(ValueError):
        event_prf(s)


# ---------------------------------------------------------------------------
# Histograms and curves

def test_dwell_histogram_empty():
    s, _ = classify(LabeledStream(GEOM, [0], [0], [0], [1]), FilterConfig(delta_us=10))
    counts, edges = dwell_histogram(s, DetectorConfig(eta_us=100), bins=10)
    assert counts.sum() == 0


def test_dwell_histogram_counts_pairs():
    events = sorted([(0, 3, 3, 1), (50, 3, 3, 1), (700, 3, 3, 0), (750, 3, 3, 0),
                     (5000, 2, 2, 1), (5050, 2, 2, 1), (5400, 2, 2, 0), (5450, 2, 2, 0)])
    s = LabeledStream(GEOM, [e[0] for e in events], [e[1] for e in events],
                      [e[2] for e in events], [e[3] for e in events])
    s, _ = classify(s, FilterConfig(delta_us=100))
    counts, _ = dwell_histogram(s, DetectorConfig(eta_us=1000, omega_px=0),
                                bins=20, cap_us=2000)
    assert counts.sum() == 2
    assert set(measured_dwells(s, 2000, 0)) == {700, 400}


def test_percent_removed_curve_properties():
    rng = np.random.default_rng(6)
    s, _ = classify(random_stream(rng, GEOM, 300, max_t=5000, quantum=25),
                    FilterConfig(delta_us=100))
    grid = [0, 50, 200, 1000, 4000]
    curve = percent_removed_curve(s, grid, DetectorConfig(eta_us=1000, omega_px=1))
    assert curve[0] == (0.0, 0.0)
    fracs = [f for _, f in curve]
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))
    assert all(0.0 <= f <= 1.0 for f in fracs)


def test_curve_csv_output():
    buf = io.StringIO()
    write_curve([(0.0, 0.0), (100.0, 0.5)], buf)
    assert buf.getvalue().splitlines()[0] == "eta_us,fraction_removed"
    assert "100.0,0.5" in buf.getvalue()


# ---------------------------------------------------------------------------
# Boxes

def test_iou_po_reference_values():
    a = BBox(0, 0, 0, 10, 10)
    b = BBox(0, 5, 0, 15, 10)
    assert iou(a, a) == 1.0 and percent_overlap(a, a) == 1.0
    assert iou(a, b) == pytest.approx(1 / 3)
    assert percent_overlap(a, b) == pytest.approx(0.5)
    disjoint = BBox(0, 20, 20, 30, 30)
    assert iou(a, disjoint) == 0.0 and percent_overlap(a, disjoint) == 0.0


def test_iou_symmetric_po_not():
    a = BBox(0, 0, 0, 10, 10)
    b = BBox(0, 0, 0, 5, 10)
    assert iou(a, b) == iou(b, a)
    assert percent_overlap(a, b) != percent_overlap(b, a)


def test_iou_bounded_by_overlaps():
    rng = np.random.default_rng(7)
    for _ in range(100):
        x0, y0 = rng.integers(0, 20, 2)
        a = BBox(0, x0, y0, x0 + rng.integers(1, 15), y0 + rng.integers(1, 15))
        x1, y1 = rng.integers(0, 20, 2)
        b = BBox(0, x1, y1, x1 + rng.integers(1, 15), y1 + rng.integers(1, 15))
        assert iou(a, b) <= min(percent_overlap(a, b), percent_overlap(b, a)) + 1e-12


def test_match_boxes_identity():
    boxes = [BBox(0, 0, 0, 10, 10), BBox(0, 20, 20, 30, 30)]
    r = match_boxes(boxes, boxes, iou_min=0.5)
    assert r.precision == 1.0 and r.recall == 1.0 and r.avg_iou == 1.0


def test_match_boxes_exclusion_window():
    boxes = [BBox(100, 0, 0, 10, 10)]
    r = match_boxes(boxes, boxes, iou_min=0.5, exclusion_windows=[(0, 200)])
    assert r.tp == 0 and r.fp == 0 and r.fn == 0


def test_match_boxes_partial():
    gts = [BBox(0, 0, 0, 10, 10), BBox(0, 50, 50, 60, 60)]
    dets = [BBox(0, 0, 2, 10, 12)]  # IoU 0.6667 with the first gt
    r = match_boxes(dets, gts, iou_min=0.5)
    assert r.tp == 1 and r.fn == 1 and r.recall == 0.5
    assert r.avg_iou == pytest.approx(2 / 3, abs=1e-9)


def test_match_boxes_greedy_full_match_at_zero_threshold():
    gts = [BBox(0, 0, 0, 10, 10), BBox(0, 5, 5, 15, 15)]
    dets = [BBox(0, 1, 1, 11, 11)]
    r = match_boxes(dets, gts, iou_min=0.0)
    assert r.tp == min(len(dets), len(gts))


def test_box_csv_round_trip(tmp_path):
    boxes = [BBox(10, 0, 1, 5, 6), BBox(20, 2, 3, 9, 8)]
    path = tmp_path / "boxes.csv"
    write_boxes(boxes, str(path))
    assert read_boxes(str(path)) == boxes
