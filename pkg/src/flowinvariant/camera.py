"""Pinhole camera, angular pixel coordinates, FOE geometry and lookup synthesis.

Image convention: x to the right, y downward, integer coordinates are pixel
centers. The azimuth ``phi`` is ``atan2(dy, dx)`` and ``theta`` is the angle
between the viewing ray and the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCamera, InvalidConfig, LateralMotion

DEFAULT_EXCLUSION_RADIUS_PX = 8.0
RATIO_COS_EPS = 1e-9
LATERAL_EPS = 1e-6
BEHIND_EPS = 1e-9

FOE_SOURCES = ("assumed-principal-point", "from-translation", "estimated")


@dataclass(frozen=True)
class CameraModel:
    focal_length_px: float
    principal_point: tuple[float, float]
    width: int
    height: int

    def __post_init__(self) -> None:
        f = self.focal_length_px
        if not (math.isfinite(f) and f > 0):
            raise InvalidConfig("focal_length_px", f"must be positive and finite, got {f!r}")
        if int(self.width) != self.width or self.width < 1:
            raise InvalidConfig("width", f"must be a positive integer, got {self.width!r}")
        if int(self.height) != self.height or self.height < 1:
            raise InvalidConfig("height", f"must be a positive integer, got {self.height!r}")
        cx, cy = self.principal_point
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise InvalidConfig("principal_point", "must be finite")
        object.__setattr__(self, "principal_point", (float(cx), float(cy)))
        object.__setattr__(self, "focal_length_px", float(f))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def centered(cls, focal_length_px: float, width: int, height: int) -> CameraModel:
        """Camera whose principal point sits on the central pixel."""
        return cls(focal_length_px, ((width - 1) / 2.0, (height - 1) / 2.0), width, height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates ``(xs, ys)`` as float arrays of image shape."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width].astype(np.float64)
        return xs, ys

    def to_dict(self) -> dict:
        return {
            "focal_length_px": self.focal_length_px,
            "principal_point": list(self.principal_point),
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CameraModel:
        try:
            return cls(
                float(d["focal_length_px"]),
                tuple(float(c) for c in d["principal_point"]),
                int(d["width"]),
                int(d["height"]),
            )
        except KeyError as exc:
            raise InvalidConfig(f"camera.{exc.args[0]}", "missing") from None


class AngularCoords(NamedTuple):
    theta: float
    phi: float
    valid: bool


@dataclass(frozen=True)
class FoePoint:
    position: tuple[float, float]
    source: str = "assumed-principal-point"

    def __post_init__(self) -> None:
        x, y = self.position
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidConfig("foe.position", "must be finite")
        if self.source not in FOE_SOURCES:
            raise InvalidConfig("foe.source", f"unknown source {self.source!r}")
        object.__setattr__(self, "position", (float(x), float(y)))

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]

    @classmethod
    def at_principal_point(cls, cam: CameraModel) -> FoePoint:
        return cls(cam.principal_point, "assumed-principal-point")

    def to_dict(self) -> dict:
        return {"position": list(self.position), "source": self.source}


def pixel_to_angles(cam: CameraModel, pixel: tuple[float, float]) -> AngularCoords:
    dx = pixel[0] - cam.principal_point[0]
    dy = pixel[1] - cam.principal_point[1]
    if dx == 0 and dy == 0:
        return AngularCoords(0.0, 0.0, False)
    theta = math.atan(math.hypot(dx, dy) / cam.focal_length_px)
    return AngularCoords(theta, math.atan2(dy, dx), True)


def angles_to_pixel(cam: CameraModel, theta: float, phi: float) -> tuple[float, float]:
    """Inverse of :func:`pixel_to_angles` (image radius ``f * tan(theta)``)."""
    r = cam.focal_length_px * math.tan(theta)
    return (cam.principal_point[0] + r * math.cos(phi), cam.principal_point[1] + r * math.sin(phi))


def azimuth_about(foe: FoePoint, pixel: tuple[float, float]) -> tuple[float, bool]:
    dx = pixel[0] - foe.x
    dy = pixel[1] - foe.y
    if dx == 0 and dy == 0:
        return 0.0, False
    return math.atan2(dy, dx), True


def project(cam: CameraModel, point_cam) -> tuple[float, float]:
    X, Y, Z = (float(c) for c in point_cam)
    if Z <= BEHIND_EPS:
        raise BehindCamera(f"point has Z={Z!r} (must exceed {BEHIND_EPS})")
    f = cam.focal_length_px
    return (cam.principal_point[0] + f * X / Z, cam.principal_point[1] + f * Y / Z)


def project_points(cam: CameraModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised projection of ``(N, 3)`` points.

    Returns ``(x, y, in_front)``; coordinates of points with ``Z <= 1e-9`` are NaN.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    Z = points[:, 2]
    in_front = Z > BEHIND_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(in_front, cam.principal_point[0] + cam.focal_length_px * points[:, 0] / Z, np.nan)
        y = np.where(in_front, cam.principal_point[1] + cam.focal_length_px * points[:, 1] / Z, np.nan)
    return x, y, in_front


def foe_from_translation(cam: CameraModel, t_dir) -> FoePoint:
    tx, ty, tz = (float(c) for c in t_dir)
    if abs(tz) <= LATERAL_EPS:
        raise LateralMotion(f"translation {t_dir!r} has no forward component; FOE at infinity")
    f = cam.focal_length_px
    cx, cy = cam.principal_point
    return FoePoint((cx + f * tx / tz, cy + f * ty / tz), "from-translation")


@dataclass(frozen=True, eq=False)
class LookupImage:
    """Per-pixel expected flow direction about a FOE for any static scene.

    ``radial_dir[..., 0]`` / ``radial_dir[..., 1]`` hold ``cos`` / ``sin`` of the
    azimuth about the FOE and are defined wherever ``valid``. ``ratio`` holds
    ``tan`` of that azimuth (NaN where ``ratio_valid`` is false).
    """

    camera: CameraModel
    foe: FoePoint
    exclusion_radius_px: float
    ratio: np.ndarray
    ratio_valid: np.ndarray
    radial_dir: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.ratio, self.ratio_valid, self.radial_dir, self.valid):
            arr.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape


def synthesize_lookup(
    cam: CameraModel,
    foe: FoePoint | None = None,
    exclusion_radius_px: float = DEFAULT_EXCLUSION_RADIUS_PX,
) -> LookupImage:
    """Build the lookup image about ``foe`` (principal point when omitted).

    Nothing about depth or speed enters: the result depends on pixel position
    relative to the FOE only.
    """
    if not exclusion_radius_px >= 0:
        raise InvalidConfig("exclusion_radius_px", f"must be >= 0, got {exclusion_radius_px!r}")
    if foe is None:
        foe = FoePoint.at_principal_point(cam)
    xs, ys = cam.pixel_grid()
    dx = xs - foe.x
    dy = ys - foe.y
    dist = np.hypot(dx, dy)
    valid = (dist > exclusion_radius_px) & (dist > 0)

    safe = np.where(valid, dist, 1.0)
    radial = np.stack([np.where(valid, dx / safe, 0.0), np.where(valid, dy / safe, 0.0)], axis=-1)
    ratio_valid = valid & (np.abs(radial[..., 0]) > RATIO_COS_EPS)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(ratio_valid, dy / dx, np.nan)
    return LookupImage(cam, foe, float(exclusion_radius_px), ratio, ratio_valid, radial, valid)
