"""Dense two-frame optical flow.

The estimator is a coarse-to-fine iterative Lucas-Kanade solver with Gaussian
window weights: at every pyramid level the next frame is warped by the current
flow estimate and a per-pixel 2x2 least-squares system refines it. Pixels whose
local structure tensor is (nearly) rank deficient, pixels closer than the
window radius to the border, and pixels whose match falls outside the next
frame are reported invalid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, FrameTooSmall, InvalidConfig

_DERIV = np.array([-0.5, 0.0, 0.5])


@dataclass(eq=False)
class Frame:
    """Grayscale image with intensities in ``[0, 1]``, indexed ``[y, x]``."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise InvalidConfig("frame", f"expected a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise InvalidConfig("frame", "intensities must be finite and within [0, 1]")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(eq=False)
class FlowField:
    """Per-pixel flow ``(u, v)`` in px/frame with a validity mask.

    Values at invalid pixels carry no meaning; constructors zero them.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u)
        v = np.asarray(self.v)
        valid = np.asarray(self.valid, dtype=bool)
        if not (u.shape == v.shape == valid.shape) or u.ndim != 2:
            raise DimensionMismatch(f"u {u.shape}, v {v.shape}, valid {valid.shape} must be equal 2-D shapes")
        if not np.issubdtype(u.dtype, np.floating):
            u = u.astype(np.float64)
        if not np.issubdtype(v.dtype, np.floating):
            v = v.astype(np.float64)
        valid = valid & np.isfinite(u) & np.isfinite(v)
        self.u = np.where(valid, u, u.dtype.type(0))
        self.v = np.where(valid, v, v.dtype.type(0))
        self.valid = valid

    @classmethod
    def from_uv(cls, uv: np.ndarray, valid: np.ndarray | None = None) -> FlowField:
        uv = np.asarray(uv)
        if valid is None:
            valid = np.ones(uv.shape[:2], dtype=bool)
        return cls(uv[..., 0], uv[..., 1], valid)

    @classmethod
    def invalid(cls, height: int, width: int) -> FlowField:
        z = np.zeros((height, width))
        return cls(z, z.copy(), np.zeros((height, width), dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    @property
    def width(self) -> int:
        return self.valid.shape[1]

    @property
    def height(self) -> int:
        return self.valid.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def scaled(self, k: float) -> FlowField:
        return FlowField(self.u * k, self.v * k, self.valid.copy())

    def uv(self) -> np.ndarray:
        return np.stack([self.u, self.v], axis=-1)

    def equals(self, other: FlowField) -> bool:
        """Same validity and bit-identical values at valid pixels."""
        if self.shape != other.shape or not np.array_equal(self.valid, other.valid):
            return False
        m = self.valid
        return np.array_equal(self.u[m], other.u[m]) and np.array_equal(self.v[m], other.v[m])


@dataclass(frozen=True)
class FlowParams:
    pyramid_levels: int = 3
    window_radius_px: int = 7
    iterations_per_level: int = 3
    downscale_factor: float = 2.0
    # mean squared gradient along the weakest local direction, intensity^2/px^2
    min_eigenvalue: float = 1e-5

    def __post_init__(self) -> None:
        if int(self.pyramid_levels) != self.pyramid_levels or self.pyramid_levels < 1:
            raise InvalidConfig("flow.pyramid_levels", "must be an integer >= 1")
        if int(self.window_radius_px) != self.window_radius_px or self.window_radius_px < 2:
            raise InvalidConfig("flow.window_radius_px", "must be an integer >= 2")
        if int(self.iterations_per_level) != self.iterations_per_level or self.iterations_per_level < 1:
            raise InvalidConfig("flow.iterations_per_level", "must be an integer >= 1")
        if not (1.0 < self.downscale_factor <= 4.0):
            raise InvalidConfig("flow.downscale_factor", "must lie in (1, 4]")
        if not (self.min_eigenvalue > 0 and math.isfinite(self.min_eigenvalue)):
            raise InvalidConfig("flow.min_eigenvalue", "must be positive")
        for name in ("pyramid_levels", "window_radius_px", "iterations_per_level"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def min_side(self) -> int:
        return 2 * int(self.window_radius_px) + 1


def _level_shape(shape: tuple[int, int], factor: float) -> tuple[int, int]:
    return tuple(max(1, int(math.floor(n / factor + 0.5))) for n in shape)


def _pyramid_shapes(shape: tuple[int, int], levels: int, factor: float) -> list[tuple[int, int]]:
    shapes = [tuple(shape)]
    for _ in range(levels - 1):
        shapes.append(_level_shape(shapes[-1], factor))
    return shapes


def _max_levels(shape: tuple[int, int], params: FlowParams) -> int:
    levels = 1
    s = tuple(shape)
    while levels < params.pyramid_levels:
        s = _level_shape(s, params.downscale_factor)
        if min(s) < params.min_side:
            break
        levels += 1
    return levels


def _downsample(img: np.ndarray, new_shape: tuple[int, int], factor: float) -> np.ndarray:
    smoothed = ndimage.gaussian_filter(img, sigma=factor / 2.0, mode="nearest")
    sy = img.shape[0] / new_shape[0]
    sx = img.shape[1] / new_shape[1]
    yy, xx = np.mgrid[0 : new_shape[0], 0 : new_shape[1]].astype(np.float64)
    coords = [yy * sy + (sy - 1) / 2.0, xx * sx + (sx - 1) / 2.0]
    out = ndimage.map_coordinates(smoothed, coords, order=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def build_pyramid(frame: Frame, params: FlowParams) -> list[Frame]:
    """Gaussian pyramid; level 0 is ``frame`` itself."""
    shapes = _pyramid_shapes(frame.shape, params.pyramid_levels, params.downscale_factor)
    if min(shapes[-1]) < params.min_side:
        raise FrameTooSmall(
            f"coarsest level {shapes[-1]} is smaller than the {params.min_side}px window "
            f"for {frame.shape} with {params.pyramid_levels} levels"
        )
    levels = [frame]
    for shape in shapes[1:]:
        levels.append(Frame(_downsample(levels[-1].pixels, shape, params.downscale_factor)))
    return levels


def _grad(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = ndimage.correlate1d(img, _DERIV, axis=1, mode="nearest")
    gy = ndimage.correlate1d(img, _DERIV, axis=0, mode="nearest")
    return gx, gy


def _upsample_flow(u: np.ndarray, v: np.ndarray, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    sy = shape[0] / u.shape[0]
    sx = shape[1] / u.shape[1]
    yy, xx = np.mgrid[0 : shape[0], 0 : shape[1]].astype(np.float64)
    coords = [(yy - (sy - 1) / 2.0) / sy, (xx - (sx - 1) / 2.0) / sx]
    uu = ndimage.map_coordinates(u, coords, order=1, mode="nearest") * sx
    vv = ndimage.map_coordinates(v, coords, order=1, mode="nearest") * sy
    return uu, vv


def _refine_level(
    i1: np.ndarray, i2: np.ndarray, u: np.ndarray, v: np.ndarray, params: FlowParams
) -> tuple[np.ndarray, np.ndarray]:
    sigma = params.window_radius_px / 2.0
    smooth = dict(sigma=sigma, truncate=2.0, mode="nearest")
    coeffs = ndimage.spline_filter(i2, order=3, mode="nearest")
    i1x, i1y = _grad(i1)
    yy, xx = np.mgrid[0 : i1.shape[0], 0 : i1.shape[1]].astype(np.float64)
    for _ in range(params.iterations_per_level):
        warped = ndimage.map_coordinates(coeffs, [yy + v, xx + u], order=3, mode="nearest", prefilter=False)
        i2x, i2y = _grad(warped)
        gx = 0.5 * (i1x + i2x)
        gy = 0.5 * (i1y + i2y)
        it = warped - i1
        sxx = ndimage.gaussian_filter(gx * gx, **smooth)
        sxy = ndimage.gaussian_filter(gx * gy, **smooth)
        syy = ndimage.gaussian_filter(gy * gy, **smooth)
        sxt = ndimage.gaussian_filter(gx * it, **smooth)
        syt = ndimage.gaussian_filter(gy * it, **smooth)
        det = sxx * syy - sxy * sxy
        trace = sxx + syy
        ok = det > 1e-9 * trace * trace + 1e-300
        safe = np.where(ok, det, 1.0)
        du = np.where(ok, (-syy * sxt + sxy * syt) / safe, 0.0)
        dv = np.where(ok, (sxy * sxt - sxx * syt) / safe, 0.0)
        u = u + du
        v = v + dv
    return u, v


def _min_eigenvalue(img: np.ndarray, radius: int) -> np.ndarray:
    gx, gy = _grad(img)
    smooth = dict(sigma=radius / 2.0, truncate=2.0, mode="nearest")
    sxx = ndimage.gaussian_filter(gx * gx, **smooth)
    sxy = ndimage.gaussian_filter(gx * gy, **smooth)
    syy = ndimage.gaussian_filter(gy * gy, **smooth)
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(np.maximum(half_tr**2 - (sxx * syy - sxy * sxy), 0.0))
    return half_tr - disc


def estimate_flow(prev: Frame, next: Frame, params: FlowParams | None = None) -> FlowField:
    """Dense flow such that ``prev(p) ~ next(p + flow(p))``.

    The pyramid depth is reduced automatically when the frame is too small for
    the requested number of levels.
    """
    params = params or FlowParams()
    if prev.shape != next.shape:
        raise DimensionMismatch(f"frame shapes differ: {prev.shape} vs {next.shape}")
    if min(prev.shape) < params.min_side:
        raise FrameTooSmall(f"frames {prev.shape} smaller than the {params.min_side}px window")

    levels = _max_levels(prev.shape, params)
    level_params = FlowParams(
        levels, params.window_radius_px, params.iterations_per_level, params.downscale_factor, params.min_eigenvalue
    )
    pyr1 = build_pyramid(prev, level_params)
    pyr2 = build_pyramid(next, level_params)

    u = v = None
    for lvl in range(levels - 1, -1, -1):
        i1 = pyr1[lvl].pixels
        i2 = pyr2[lvl].pixels
        if u is None:
            u = np.zeros_like(i1)
            v = np.zeros_like(i1)
        else:
            u, v = _upsample_flow(u, v, i1.shape)
        u, v = _refine_level(i1, i2, u, v, params)

    h, w = prev.shape
    r = params.window_radius_px
    valid = np.zeros((h, w), dtype=bool)
    valid[r : h - r, r : w - r] = True
    valid &= _min_eigenvalue(prev.pixels, r) >= params.min_eigenvalue
    yy, xx = np.mgrid[0:h, 0:w]
    tx = xx + u
    ty = yy + v
    valid &= (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
    valid &= np.isfinite(u) & np.isfinite(v)
    return FlowField(u, v, valid)
