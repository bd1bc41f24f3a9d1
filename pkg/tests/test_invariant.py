import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowinvariant import (
    CameraModel,
    DimensionMismatch,
    FlowField,
    FoePoint,
    deviation_image,
    ratio_image,
    render_invariant,
    residual_image,
    synthesize_lookup,
)
from flowinvariant.invariant import INVALID_GRAY, DeviationImage, RatioImage

from conftest import radial_flow


def test_radial_flow_has_zero_deviation_and_residual(cam):
    foe = (90.0, 50.0)
    lk = synthesize_lookup(cam, FoePoint(foe, "estimated"))
    flow = radial_flow(cam, foe, scale=0.1)
    dev = deviation_image(flow, lk)
    assert dev.valid.sum() > 0.9 * lk.valid.sum() - 200
    assert np.max(np.abs(dev.value[dev.valid])) <= 1e-12
    res = residual_image(ratio_image(flow), lk)
    rel = np.abs(res.value[res.valid]) / np.maximum(np.abs(lk.ratio[res.valid]), 1.0)
    assert np.max(rel) <= 1e-12


@given(
    st.floats(0.51, 20.0), st.floats(-math.pi, math.pi),
    st.integers(0, 159), st.integers(0, 119),
)
def test_deviation_is_sine_of_angle(mag, angle, x, y):
    """Trig oracle: deviation equals sin(flow angle - radial angle)."""
    cam = CameraModel.centered(100.0, 160, 120)
    lk = synthesize_lookup(cam, exclusion_radius_px=8.0)
    u = np.zeros(cam.shape)
    v = np.zeros(cam.shape)
    u[y, x] = mag * math.cos(angle)
    v[y, x] = mag * math.sin(angle)
    dev = deviation_image(FlowField(u, v, np.ones(cam.shape, bool)), lk)
    d = math.hypot(x - 79.5, y - 59.5)
    if d <= 8.0:
        assert not dev.valid[y, x]
        return
    radial = math.atan2(y - 59.5, x - 79.5)
    assert dev.valid[y, x]
    assert dev.value[y, x] == pytest.approx(math.sin(angle - radial), abs=1e-12)


@given(st.floats(1e-3, 1e3))
def test_deviation_independent_of_flow_scale(k):
    cam = CameraModel.centered(80.0, 48, 36)
    lk = synthesize_lookup(cam)
    rng = np.random.default_rng(1)
    flow = FlowField(rng.normal(size=cam.shape) * 4, rng.normal(size=cam.shape) * 4, np.ones(cam.shape, bool))
    a = deviation_image(flow, lk, min_flow_mag=1e-9)
    b = deviation_image(flow.scaled(k), lk, min_flow_mag=1e-9)
    assert np.array_equal(a.valid, b.valid)
    assert np.max(np.abs(a.value - b.value)) <= 1e-12


def test_deviation_invalid_below_min_magnitude(cam):
    lk = synthesize_lookup(cam)
    flow = radial_flow(cam, cam.principal_point, scale=0.001)
    assert not deviation_image(flow, lk, 0.5).valid.any()


def test_deviation_range_and_invalid_propagation(cam):
    lk = synthesize_lookup(cam)
    rng = np.random.default_rng(2)
    valid = rng.random(cam.shape) > 0.3
    flow = FlowField(rng.normal(size=cam.shape) * 3, rng.normal(size=cam.shape) * 3, valid)
    dev = deviation_image(flow, lk)
    assert np.all(np.abs(dev.value) <= 1.0)
    assert not np.any(dev.valid & ~valid)
    assert not np.any(dev.valid & ~lk.valid)
    assert np.all(dev.value[~dev.valid] == 0.0)


def test_ratio_image_epsilon():
    u = np.array([[2.0, 1e-7, 0.0, -4.0]])
    v = np.array([[1.0, 1.0, 1.0, 2.0]])
    r = ratio_image(FlowField(u, v, np.ones_like(u, bool)))
    assert r.valid.tolist() == [[True, False, False, True]]
    assert r.value[0, 0] == 0.5 and r.value[0, 3] == -0.5


def test_dimension_mismatch(cam):
    lk = synthesize_lookup(cam)
    small = FlowField(np.ones((10, 10)), np.ones((10, 10)), np.ones((10, 10), bool))
    with pytest.raises(DimensionMismatch):
        deviation_image(small, lk)
    with pytest.raises(DimensionMismatch):
        residual_image(ratio_image(small), lk)


def test_render_colors():
    img = DeviationImage(np.array([[0.5, -1.5, 0.0, 0.3]]), np.array([[True, True, True, False]]))
    rgb = render_invariant(img, vmax=1.0)
    assert rgb.dtype == np.uint8
    assert rgb[0, 0].tolist() == [128, 0, 0]
    assert rgb[0, 1].tolist() == [0, 0, 255]
    assert rgb[0, 2].tolist() == [0, 0, 0]
    assert rgb[0, 3].tolist() == [INVALID_GRAY] * 3


def test_render_lookup_quadrant_colors(cam):
    lk = synthesize_lookup(cam)
    rgb = render_invariant(RatioImage(np.where(lk.ratio_valid, lk.ratio, 0.0), lk.ratio_valid), 3.0)
    # lower right (dx > 0, dy > 0) positive, upper right negative
    assert rgb[110, 150, 0] > 0 and rgb[110, 150, 2] == 0
    assert rgb[10, 150, 2] > 0 and rgb[10, 150, 0] == 0
