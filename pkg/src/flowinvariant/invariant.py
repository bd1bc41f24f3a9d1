"""Flow-to-invariant transforms: ratio image, residual against the lookup,
sine-deviation image and the red/blue sign rendering."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .camera import LookupImage
from .errors import DimensionMismatch, InvalidConfig
from .flow import FlowField

DEFAULT_U_EPSILON = 1e-6
DEFAULT_MIN_FLOW_MAG = 0.5
DEFAULT_VMAX_RATIO = 3.0
DEFAULT_VMAX_DEVIATION = 1.0
INVALID_GRAY = 128


@dataclass(eq=False)
class RatioImage:
    value: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape


@dataclass(eq=False)
class DeviationImage:
    """Sine of the angle between measured flow and the expected radial direction.

    Also used for ratio residuals, whose values are not bounded.
    """

    value: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape


def _check_dims(a: tuple[int, int], b: tuple[int, int]) -> None:
    if tuple(a) != tuple(b):
        raise DimensionMismatch(f"image shapes differ: {tuple(a)} vs {tuple(b)}")


def ratio_image(flow: FlowField, u_epsilon: float = DEFAULT_U_EPSILON) -> RatioImage:
    if not u_epsilon > 0:
        raise InvalidConfig("u_epsilon", "must be > 0")
    valid = flow.valid & (np.abs(flow.u) > u_epsilon)
    safe_u = np.where(valid, flow.u, 1.0)
    value = np.where(valid, flow.v / safe_u, 0.0)
    return RatioImage(value, valid)


def residual_image(ratio: RatioImage, lookup: LookupImage) -> DeviationImage:
    _check_dims(ratio.shape, lookup.shape)
    valid = ratio.valid & lookup.ratio_valid
    value = np.where(valid, ratio.value - np.where(valid, lookup.ratio, 0.0), 0.0)
    return DeviationImage(value, valid)


@numba.njit(cache=True, nogil=True)
def _deviation_kernel(u, v, flow_valid, radial, dir_valid, min_mag, out, out_valid):
    h, w = u.shape
    min_sq = min_mag * min_mag
    for y in range(h):
        for x in range(w):
            ok = False
            if flow_valid[y, x] and dir_valid[y, x]:
                uu = u[y, x]
                vv = v[y, x]
                sq = uu * uu + vv * vv
                if sq >= min_sq:
                    c = radial[y, x, 0]
                    s = radial[y, x, 1]
                    out[y, x] = (c * vv - s * uu) / np.sqrt(sq)
                    ok = True
            if not ok:
                out[y, x] = 0.0
            out_valid[y, x] = ok


def deviation_image(
    flow: FlowField, lookup: LookupImage, min_flow_mag: float = DEFAULT_MIN_FLOW_MAG
) -> DeviationImage:
    """Signed sine of the angle from the lookup's radial direction to the flow.

    Zero for flow pointing away from or toward the FOE; the magnitude of the
    flow does not matter once it reaches ``min_flow_mag``.
    """
    _check_dims(flow.shape, lookup.shape)
    if not min_flow_mag > 0:
        raise InvalidConfig("min_flow_mag", "must be > 0")
    out = np.empty(flow.shape, dtype=np.float64)
    out_valid = np.empty(flow.shape, dtype=np.bool_)
    _deviation_kernel(
        flow.u, flow.v, flow.valid, lookup.radial_dir, lookup.valid, float(min_flow_mag), out, out_valid
    )
    return DeviationImage(out, out_valid)


def render_invariant(values: RatioImage | DeviationImage, vmax: float) -> np.ndarray:
    """RGB ``uint8`` image: red for positive, blue for negative, gray if invalid."""
    if not vmax > 0:
        raise InvalidConfig("vmax", "must be > 0")
    val = np.where(values.valid, values.value, 0.0)
    level = np.rint(np.minimum(np.abs(val) / vmax, 1.0) * 255.0).astype(np.uint8)
    rgb = np.zeros(values.shape + (3,), dtype=np.uint8)
    rgb[..., 0] = np.where(val > 0, level, 0)
    rgb[..., 2] = np.where(val < 0, level, 0)
    rgb[~values.valid] = INVALID_GRAY
    return rgb


def quadrant_corner(values: np.ndarray, valid: np.ndarray) -> tuple[float, float]:
    """Locate the common corner of the four sign quadrants of a ratio map.

    Along each row the sign flips where the vertical boundary is crossed, along
    each column where the horizontal one is. Each flip contributes the midpoint
    between the two valid pixels that straddle it; the median over rows
    (columns) gives the boundary position.
    """
    sign = np.where(valid, np.sign(values), 0.0)
    xs = _flip_positions(sign)
    ys = _flip_positions(sign.T)
    if not xs or not ys:
        return float("nan"), float("nan")
    return float(np.median(xs)), float(np.median(ys))


def _flip_positions(sign: np.ndarray) -> list[float]:
    flips: list[float] = []
    for row in sign:
        idx = np.flatnonzero(row != 0)
        if idx.size < 2:
            continue
        s = row[idx]
        change = np.flatnonzero(s[1:] != s[:-1])
        if change.size == 1:
            k = change[0]
            flips.append(0.5 * (idx[k] + idx[k + 1]))
    return flips
