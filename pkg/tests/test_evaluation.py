import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowinvariant import DimensionMismatch, eval_masks
from flowinvariant.evaluation import exclusion_mask, frame_metrics
from flowinvariant import CameraModel, synthesize_lookup


def test_iou_one_third():
    pred = np.zeros((20, 20), bool)
    gt = np.zeros((20, 20), bool)
    pred[0:10, 0:10] = True
    gt[0:10, 5:15] = True
    m = eval_masks([pred], [gt]).per_frame[0]
    assert (m.tp, m.fp, m.fn) == (50, 50, 50)
    assert m.iou == 1 / 3
    assert m.precision == 0.5 and m.recall == 0.5 and m.f1 == 0.5


def test_identical_and_disjoint():
    a = np.zeros((5, 5), bool)
    a[1:3, 1:3] = True
    same = frame_metrics(a, a)
    assert (same.precision, same.recall, same.iou, same.f1) == (1.0, 1.0, 1.0, 1.0)
    b = np.zeros((5, 5), bool)
    b[4, 4] = True
    dis = frame_metrics(a, b)
    assert (dis.precision, dis.recall, dis.iou, dis.f1) == (0.0, 0.0, 0.0, 0.0)


def test_empty_cases():
    z = np.zeros((4, 4), bool)
    one = z.copy()
    one[0, 0] = True
    assert frame_metrics(z, z).precision == 1.0 and frame_metrics(z, z).iou == 1.0
    missed = frame_metrics(z, one)
    assert missed.precision == 0.0 and missed.recall == 0.0
    false_alarm = frame_metrics(one, z)
    assert false_alarm.precision == 0.0 and false_alarm.recall == 0.0


@given(arrays(np.bool_, (6, 6)), arrays(np.bool_, (6, 6)))
def test_metrics_in_unit_interval(p, g):
    m = frame_metrics(p, g)
    for x in (m.precision, m.recall, m.f1, m.iou):
        assert 0.0 <= x <= 1.0
    if m.precision + m.recall > 0:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
    assert m.tp + m.fp == int(p.sum()) and m.tp + m.fn == int(g.sum())


def test_ignore_mask_and_means():
    pred = np.zeros((10, 10), bool)
    gt = np.zeros((10, 10), bool)
    pred[0, 0] = True
    ignore = np.zeros((10, 10), bool)
    ignore[0, 0] = True
    rep = eval_masks([pred, gt], [gt, gt], ignore)
    assert rep.per_frame[0].fp == 0 and rep.mean_precision == 1.0
    assert rep.metadata["ignored_pixels"] == [1, 1]
    assert rep.frames_evaluated == 2
    assert rep.to_csv().splitlines()[0] == "frame,tp,fp,fn,precision,recall,f1,iou"


def test_mismatch_errors():
    with pytest.raises(DimensionMismatch):
        eval_masks([np.zeros((2, 2), bool)], [])
    with pytest.raises(DimensionMismatch):
        eval_masks([np.zeros((2, 2), bool)], [np.zeros((2, 3), bool)])


def test_exclusion_mask_matches_lookup():
    cam = CameraModel.centered(50.0, 30, 20)
    lk = synthesize_lookup(cam, exclusion_radius_px=4.0)
    assert np.array_equal(exclusion_mask(lk), ~lk.valid)
