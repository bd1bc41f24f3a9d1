import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from flowinvariant import DetectionParams, FlowField, InvalidConfig, detect, detect_many, synthesize_lookup
from flowinvariant.detection import binary_close, binary_open, clean_mask, disk_offsets, label_components

from conftest import radial_flow


def _disk(r):
    return np.hypot(*np.mgrid[-r : r + 1, -r : r + 1]) <= r


def _scipy_open(mask, r):
    if r == 0:
        return mask.copy()
    # out-of-image pixels are ignored: erosion sees them as set, dilation as unset
    er = ndimage.binary_erosion(mask, _disk(r), border_value=1)
    return ndimage.binary_dilation(er, _disk(r), border_value=0)


def _scipy_close(mask, r):
    if r == 0:
        return mask.copy()
    di = ndimage.binary_dilation(mask, _disk(r), border_value=0)
    return ndimage.binary_erosion(di, _disk(r), border_value=1)


masks = arrays(np.bool_, st.tuples(st.integers(1, 40), st.integers(1, 40)))


def test_disk_offsets():
    assert len(disk_offsets(0)) == 1
    assert len(disk_offsets(1)) == 5
    assert len(disk_offsets(2)) == 13


@given(masks, st.integers(0, 3))
def test_morphology_matches_scipy(mask, r):
    assert np.array_equal(binary_open(mask, r), _scipy_open(mask, r))
    assert np.array_equal(binary_close(mask, r), _scipy_close(mask, r))


@given(masks)
def test_labeling_matches_scipy(mask):
    labels, n = label_components(mask)
    ref, m = ndimage.label(mask, structure=np.ones((3, 3)))
    assert n == m
    # same partition: a bijection between label sets
    pairs = set(zip(labels[mask].tolist(), ref[mask].tolist()))
    assert len(pairs) == n


@given(arrays(np.bool_, (48, 64), elements=st.booleans()), st.integers(1, 40))
def test_clean_mask_matches_full_image_oracle(raw, min_area):
    params = DetectionParams(open_radius_px=1, close_radius_px=2, min_area_px=min_area)
    got = clean_mask(raw, params)
    ref = _scipy_close(_scipy_open(raw, 1), 2)
    lab, n = ndimage.label(ref, structure=np.ones((3, 3)))
    areas = np.bincount(lab.ravel(), minlength=n + 1)
    keep = areas >= min_area
    keep[0] = False
    assert np.array_equal(got.mask, keep[lab])
    assert sorted(c.area_px for c in got.components) == sorted(areas[1:][keep[1:]].tolist())


def test_component_order_and_fields():
    raw = np.zeros((60, 80), bool)
    raw[5:15, 50:60] = True  # 100 px
    raw[30:50, 10:30] = True  # 400 px
    raw[40:50, 60:70] = True  # 100 px, lower than the first small one
    res = clean_mask(raw, DetectionParams())
    assert [c.id for c in res.components] == [1, 2, 3]
    # the radius-1 opening trims the four corner pixels of each square
    assert [c.area_px for c in res.components] == [396, 96, 96]
    assert res.components[0].bbox == (10, 30, 29, 49)
    assert res.components[0].centroid == pytest.approx((19.5, 39.5))
    assert res.components[1].bbox[1] == 5 and res.components[2].bbox[1] == 40


def test_small_blobs_removed():
    raw = np.zeros((40, 40), bool)
    raw[10:14, 10:14] = True  # 16 px < 25
    res = clean_mask(raw, DetectionParams())
    assert not res.mask.any() and res.components == []


def test_radial_flow_detects_nothing(cam):
    lk = synthesize_lookup(cam)
    res = detect(radial_flow(cam, cam.principal_point, 0.1), lk)
    assert not res.mask.any()


def test_swirl_patch_detected(cam):
    lk = synthesize_lookup(cam)
    flow = radial_flow(cam, cam.principal_point, 0.1)
    u, v = flow.u.copy(), flow.v.copy()
    # tangential motion inside a square on the right side
    u[20:40, 120:140] = 0.0
    v[20:40, 120:140] = 3.0
    res = detect(FlowField(u, v, flow.valid), lk)
    assert len(res.components) == 1
    assert res.components[0].bbox == (120, 20, 139, 39)


def test_detect_many_keeps_order(cam):
    lk = synthesize_lookup(cam)
    base = radial_flow(cam, cam.principal_point, 0.1)
    flows = []
    for k in range(6):
        v = base.v.copy()
        v[10 + 10 * k : 20 + 10 * k, 130:145] = 4.0
        flows.append(FlowField(base.u, v, base.valid))
    serial = detect_many(flows, lk, workers=1, first_index=3)
    threaded = detect_many(flows, lk, workers=4, first_index=3)
    assert [r.frame_index for r in threaded] == list(range(3, 9))
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.mask, b.mask) and a.components == b.components


@pytest.mark.parametrize(
    "kw,field",
    [
        ({"deviation_threshold": 0.0}, "detection.deviation_threshold"),
        ({"min_area_px": 0}, "detection.min_area_px"),
        ({"open_radius_px": -1}, "detection.open_radius_px"),
        ({"min_flow_mag": 0.0}, "detection.min_flow_mag"),
    ],
)
def test_params_validation(kw, field):
    with pytest.raises(InvalidConfig) as err:
        DetectionParams(**kw)
    assert err.value.field == field


@given(st.integers(0, 10_000), st.sampled_from([np.float32, np.float64]), st.floats(0.05, 0.9))
def test_detect_equals_unfused_path(seed, dtype, threshold):
    """detect() skips the deviation image; it must agree with the explicit chain."""
    from flowinvariant import CameraModel, deviation_image
    from flowinvariant.detection import threshold_deviation

    cam = CameraModel.centered(60.0, 64, 48)
    lk = synthesize_lookup(cam, exclusion_radius_px=5.0)
    rng = np.random.default_rng(seed)
    xs, ys = cam.pixel_grid()
    u = ((xs - 31.5) * 0.05 + rng.normal(0, 0.4, cam.shape)).astype(dtype)
    v = ((ys - 23.5) * 0.05 + rng.normal(0, 0.4, cam.shape)).astype(dtype)
    flow = FlowField(u, v, rng.random(cam.shape) > 0.1)
    params = DetectionParams(deviation_threshold=threshold, min_area_px=4)
    fused = detect(flow, lk, params)
    chain = clean_mask(threshold_deviation(deviation_image(flow, lk, params.min_flow_mag), params), params)
    assert np.array_equal(fused.mask, chain.mask)
    assert fused.components == chain.components
