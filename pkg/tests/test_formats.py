import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from flowinvariant import (
    BadMagic,
    CameraModel,
    FlowField,
    FoePoint,
    Frame,
    IoFailure,
    TruncatedFile,
    UnsupportedFormat,
    read_flow,
    read_frame,
    read_mask,
    synthesize_lookup,
    write_flow,
    write_frame,
    write_mask,
)
from flowinvariant.formats import read_lookup, read_scalar, write_lookup, write_scalar

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


@given(
    arrays(np.float32, (5, 7), elements=f32),
    arrays(np.float32, (5, 7), elements=f32),
    arrays(np.bool_, (5, 7)),
)
def test_flow_round_trip_bit_exact(tmp_path_factory, u, v, valid):
    path = tmp_path_factory.mktemp("flo") / "a.flo"
    flow = FlowField(u, v, valid)
    write_flow(path, flow)
    back = read_flow(path)
    assert back.equals(flow)
    assert back.u.dtype == np.float32


def test_two_by_one_byte_count(tmp_path):
    flow = FlowField(np.array([[1.5, 0.0]]), np.array([[-2.0, 0.0]]), np.array([[True, False]]))
    path = tmp_path / "t.flo"
    write_flow(path, flow)
    raw = path.read_bytes()
    assert len(raw) == 4 + 8 + 16
    assert np.frombuffer(raw[:4], "<f4")[0] == np.float32(202021.25)
    assert np.frombuffer(raw[4:12], "<i4").tolist() == [2, 1]
    body = np.frombuffer(raw[12:], "<f4")
    assert body[:2].tolist() == [1.5, -2.0]
    assert np.isnan(body[2:]).all()
    back = read_flow(path)
    assert back.valid.tolist() == [[True, False]]


def test_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "bad.flo"
    p.write_bytes(np.array([1.0], "<f4").tobytes() + np.array([1, 1], "<i4").tobytes() + bytes(8))
    with pytest.raises(BadMagic):
        read_flow(p)
    flow = FlowField(np.ones((3, 3)), np.ones((3, 3)), np.ones((3, 3), bool))
    write_flow(p, flow)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(TruncatedFile):
        read_flow(p)
    with pytest.raises(IoFailure):
        read_flow(tmp_path / "missing.flo")


@given(arrays(np.float64, (6, 9), elements=st.floats(0.0, 1.0)))
def test_frame_quantization_bound(tmp_path_factory, px):
    path = tmp_path_factory.mktemp("png") / "f.png"
    write_frame(path, Frame(px))
    back = read_frame(path)
    assert np.max(np.abs(back.pixels - px)) <= 1 / 510 + 1e-12


def test_frame_pgm(tmp_path):
    px = np.linspace(0, 1, 12).reshape(3, 4)
    Image.fromarray(np.floor(px * 255 + 0.5).astype(np.uint8)).save(tmp_path / "f.pgm")
    assert np.max(np.abs(read_frame(tmp_path / "f.pgm").pixels - px)) <= 1 / 510


def test_mask_threshold(tmp_path):
    Image.fromarray(np.array([[0, 127, 128, 255]], np.uint8)).save(tmp_path / "m.png")
    assert read_mask(tmp_path / "m.png").tolist() == [[False, False, True, True]]
    write_mask(tmp_path / "w.png", np.array([[True, False]]))
    assert np.asarray(Image.open(tmp_path / "w.png")).tolist() == [[255, 0]]


def test_sixteen_bit_rejected(tmp_path):
    Image.fromarray(np.full((4, 4), 40000, np.uint16)).save(tmp_path / "d.png")
    with pytest.raises(UnsupportedFormat):
        read_frame(tmp_path / "d.png")
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "c.png")
    with pytest.raises(UnsupportedFormat):
        read_mask(tmp_path / "c.png")


def test_lookup_and_scalar_files(tmp_path):
    cam = CameraModel(90.0, (30.0, 20.0), 64, 48)
    lk = synthesize_lookup(cam, FoePoint((41.0, 18.5), "estimated"), 5.0)
    write_lookup(tmp_path / "lk", lk)
    back = read_lookup(tmp_path / "lk")
    assert back.foe == lk.foe and back.camera == cam and back.exclusion_radius_px == 5.0
    assert np.array_equal(back.radial_dir, lk.radial_dir)
    stored = read_flow(tmp_path / "lk.flo")
    assert np.array_equal(stored.valid, lk.valid)
    value = np.arange(12.0).reshape(3, 4)
    valid = value % 2 == 0
    write_scalar(tmp_path / "s", value, valid, "deviation", 1.0)
    v, ok, meta = read_scalar(tmp_path / "s")
    assert np.array_equal(ok, valid) and np.array_equal(v[ok], value[valid])
    assert meta == {"kind": "scalar", "channel": "deviation", "vmax": 1.0}
