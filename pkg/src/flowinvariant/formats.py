"""On-disk formats: ``.flo`` flow fields, 8-bit grayscale frames and masks,
lookup images and scalar invariant images (``.flo`` + JSON sidecar)."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .camera import CameraModel, FoePoint, LookupImage, synthesize_lookup
from .errors import BadMagic, IoFailure, TruncatedFile, UnsupportedFormat
from .flow import FlowField, Frame

FLO_MAGIC = np.float32(202021.25)
_HEADER = 12

PathLike = str | os.PathLike


def write_flow(path: PathLike, flow: FlowField) -> None:
    """Little-endian Middlebury layout; invalid pixels are stored as NaN."""
    h, w = flow.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = np.where(flow.valid, flow.u, np.nan)
    data[..., 1] = np.where(flow.valid, flow.v, np.nan)
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes() + np.array([w, h], dtype="<i4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(data.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_flow(path: PathLike) -> FlowField:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, no header")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} != {FLO_MAGIC!r}")
    if len(raw) < _HEADER:
        raise TruncatedFile(f"{path}: header cut short")
    w, h = (int(n) for n in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if w < 0 or h < 0:
        raise TruncatedFile(f"{path}: negative dimensions {w}x{h}")
    need = _HEADER + 8 * w * h
    if len(raw) < need:
        raise TruncatedFile(f"{path}: {len(raw)} bytes, expected {need}")
    data = np.frombuffer(raw, dtype="<f4", count=2 * w * h, offset=_HEADER).reshape(h, w, 2)
    data = data.astype(np.float32)
    u = data[..., 0]
    v = data[..., 1]
    return FlowField(u, v, ~(np.isnan(u) | np.isnan(v)))


def _open_gray8(path: PathLike) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "L":
                raise UnsupportedFormat(f"{path}: mode {img.mode!r}; need 8-bit single-channel")
            return np.asarray(img, dtype=np.uint8)
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _save_gray8(path: PathLike, arr: np.ndarray) -> None:
    fmt = "PPM" if str(path).lower().endswith((".pgm", ".pnm")) else "PNG"
    try:
        Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint8)).save(path, format=fmt)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc


def read_frame(path: PathLike) -> Frame:
    return Frame(_open_gray8(path).astype(np.float64) / 255.0)


def write_frame(path: PathLike, frame: Frame) -> None:
    _save_gray8(path, np.floor(frame.pixels * 255.0 + 0.5))


def read_mask(path: PathLike) -> np.ndarray:
    return _open_gray8(path) >= 128


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    _save_gray8(path, np.where(mask, 255, 0))


def write_rgb(path: PathLike, rgb: np.ndarray) -> None:
    try:
        Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8)).save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_json(path: PathLike, obj: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_json(path: PathLike) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def write_lookup(stem: PathLike, lookup: LookupImage) -> tuple[Path, Path]:
    """Radial directions go to ``<stem>.flo`` as (u, v); metadata to ``<stem>.json``."""
    stem = Path(stem)
    flo = stem.with_suffix(".flo")
    meta = stem.with_suffix(".json")
    write_flow(flo, FlowField(lookup.radial_dir[..., 0], lookup.radial_dir[..., 1], lookup.valid))
    _write_json(
        meta,
        {
            "kind": "lookup",
            "camera": lookup.camera.to_dict(),
            "foe": lookup.foe.to_dict(),
            "exclusion_radius_px": lookup.exclusion_radius_px,
            "channels": {"u": "cos of azimuth about the FOE", "v": "sin of azimuth about the FOE"},
        },
    )
    return flo, meta


def read_lookup(stem: PathLike) -> LookupImage:
    """Rebuild a lookup from its sidecar (the direction channels are regenerated exactly)."""
    meta = _read_json(Path(stem).with_suffix(".json"))
    cam = CameraModel.from_dict(meta["camera"])
    foe = FoePoint(tuple(meta["foe"]["position"]), meta["foe"]["source"])
    return synthesize_lookup(cam, foe, float(meta["exclusion_radius_px"]))


def write_scalar(stem: PathLike, value: np.ndarray, valid: np.ndarray, channel: str, vmax: float) -> None:
    stem = Path(stem)
    write_flow(stem.with_suffix(".flo"), FlowField(value, np.zeros_like(value), valid))
    _write_json(stem.with_suffix(".json"), {"kind": "scalar", "channel": channel, "vmax": vmax})


def read_scalar(stem: PathLike) -> tuple[np.ndarray, np.ndarray, dict]:
    stem = Path(stem)
    flow = read_flow(stem.with_suffix(".flo"))
    return flow.u, flow.valid, _read_json(stem.with_suffix(".json"))
