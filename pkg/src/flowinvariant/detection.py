"""Deviation thresholding, mask cleanup and connected components."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .camera import LookupImage
from .errors import DimensionMismatch, InvalidConfig
from .flow import FlowField
from .invariant import DEFAULT_MIN_FLOW_MAG, DeviationImage


@dataclass(frozen=True)
class DetectionParams:
    deviation_threshold: float = 0.2
    min_flow_mag: float = DEFAULT_MIN_FLOW_MAG
    open_radius_px: int = 1
    close_radius_px: int = 2
    min_area_px: int = 25

    def __post_init__(self) -> None:
        if not (0.0 < self.deviation_threshold <= 1.0):
            raise InvalidConfig("detection.deviation_threshold", "must lie in (0, 1]")
        if not self.min_flow_mag > 0:
            raise InvalidConfig("detection.min_flow_mag", "must be > 0")
        for name in ("open_radius_px", "close_radius_px"):
            r = getattr(self, name)
            if int(r) != r or r < 0:
                raise InvalidConfig(f"detection.{name}", "must be an integer >= 0")
        if int(self.min_area_px) != self.min_area_px or self.min_area_px < 1:
            raise InvalidConfig("detection.min_area_px", "must be an integer >= 1")
        for name in ("open_radius_px", "close_radius_px", "min_area_px"):
            object.__setattr__(self, name, int(getattr(self, name)))


@dataclass(frozen=True)
class Component:
    id: int
    area_px: int
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    centroid: tuple[float, float]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bbox"] = list(self.bbox)
        d["centroid"] = list(self.centroid)
        return d


@dataclass(eq=False)
class DetectionResult:
    mask: np.ndarray
    components: list[Component] = field(default_factory=list)
    frame_index: int = 0

    def to_json_dict(self) -> dict:
        return {"frame_index": self.frame_index, "components": [c.to_dict() for c in self.components]}


def disk_offsets(radius: int) -> np.ndarray:
    """Integer ``(dy, dx)`` offsets with ``dx^2 + dy^2 <= radius^2``."""
    r = int(radius)
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dx * dx + dy * dy <= r * r
    return np.stack([dy[keep], dx[keep]], axis=1).astype(np.int64)


def _half_widths(radius: int) -> np.ndarray:
    """Half-width of the disk's row at each ``dy`` in ``-radius..radius``."""
    r = int(radius)
    dy = np.arange(-r, r + 1)
    return np.floor(np.sqrt(r * r - dy * dy) + 1e-9).astype(np.int32)


@numba.njit(cache=True, nogil=True)
def _erode_disk(mask, half, flip):
    """Erode ``mask ^ flip`` (``uint8`` 0/1) by the disk whose rows are ``half``; xor the result with ``flip``.

    Out-of-image pixels count as set, so with ``flip = 1`` this is a dilation
    in which they count as unset. Either way the border has no effect.
    """
    h, w = mask.shape
    r = half.shape[0] // 2
    # rows[a] is the horizontal erosion with half-width a; shifted ANDs on
    # uint8 keep every loop branch free and vectorizable
    rows = np.empty((r + 1, h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            rows[0, y, x] = mask[y, x] ^ flip
    for a in range(1, r + 1):
        for y in range(h):
            for x in range(w):
                rows[a, y, x] = rows[a - 1, y, x]
            for x in range(a, w):
                rows[a, y, x] &= rows[0, y, x - a]
            for x in range(w - a):
                rows[a, y, x] &= rows[0, y, x + a]
    out = np.empty((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            out[y, x] = 1
        for yy in range(max(0, y - r), min(h, y + r + 1)):
            a = half[yy - y + r]
            for x in range(w):
                out[y, x] &= rows[a, yy, x]
        for x in range(w):
            out[y, x] ^= flip
    return out


@numba.njit(cache=True, nogil=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _union(parent, a, b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


@numba.njit(cache=True, nogil=True)
def _label8(mask):
    """Two-pass 8-connected labeling; labels numbered in raster order of first pixel.

    Returns ``(labels, count, stats)`` where ``stats[k]`` holds area, x0, y0,
    x1, y1, sum of x and sum of y for label ``k``.
    """
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(64, dtype=np.int32)
    nxt = 1
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                continue
            # Neighbours already visited: up-left, up, up-right, left. Pixels in
            # the same row of that set are adjacent, so few unions are needed.
            up = labels[y - 1, x] if y > 0 else 0
            if up:
                labels[y, x] = up
                continue
            ur = labels[y - 1, x + 1] if y > 0 and x + 1 < w else 0
            left = labels[y, x - 1] if x > 0 else 0
            ul = labels[y - 1, x - 1] if y > 0 and x > 0 else 0
            if ur:
                labels[y, x] = ur
                if left:
                    _union(parent, ur, left)
                elif ul:
                    _union(parent, ur, ul)
            elif ul:
                labels[y, x] = ul
            elif left:
                labels[y, x] = left
            else:
                if nxt >= parent.shape[0]:
                    grown = np.zeros(parent.shape[0] * 2, dtype=np.int32)
                    grown[: parent.shape[0]] = parent
                    parent = grown
                parent[nxt] = nxt
                labels[y, x] = nxt
                nxt += 1
    remap = np.zeros(nxt, dtype=np.int32)
    count = 0
    for i in range(1, nxt):
        root = _find(parent, i)
        if root == i:
            count += 1
            remap[i] = count
        else:
            # roots are always smaller than their members, so already numbered
            remap[i] = remap[root]
    stats = np.zeros((count + 1, 7), dtype=np.int64)
    for k in range(1, count + 1):
        stats[k, 1] = w
        stats[k, 2] = h
        stats[k, 3] = -1
        stats[k, 4] = -1
    for y in range(h):
        for x in range(w):
            lab = labels[y, x]
            if lab == 0:
                continue
            lab = remap[lab]
            labels[y, x] = lab
            stats[lab, 0] += 1
            if x < stats[lab, 1]:
                stats[lab, 1] = x
            if y < stats[lab, 2]:
                stats[lab, 2] = y
            if x > stats[lab, 3]:
                stats[lab, 3] = x
            if y > stats[lab, 4]:
                stats[lab, 4] = y
            stats[lab, 5] += x
            stats[lab, 6] += y
    return labels, count, stats


@numba.njit(cache=True, nogil=True)
def _keep_labels(labels, keep, out):
    h, w = labels.shape
    for y in range(h):
        for x in range(w):
            out[y, x] = keep[labels[y, x]]


@numba.njit(cache=True, nogil=True)
def _threshold_kernel(u, v, flow_valid, radial, dir_valid, min_mag, threshold, out):
    """Thresholded deviation written straight to a mask; returns the set-pixel bbox.

    The arithmetic matches the deviation kernel term for term, so the mask is
    identical to thresholding the deviation image.
    """
    h, w = u.shape
    min_sq = min_mag * min_mag
    y0 = h
    y1 = -1
    x0 = w
    x1 = -1
    for y in range(h):
        for x in range(w):
            hit = False
            if flow_valid[y, x] and dir_valid[y, x]:
                uu = u[y, x]
                vv = v[y, x]
                sq = uu * uu + vv * vv
                if sq >= min_sq:
                    c = radial[y, x, 0]
                    s = radial[y, x, 1]
                    hit = abs((c * vv - s * uu) / np.sqrt(sq)) > threshold
            out[y, x] = hit
            if hit:
                if y < y0:
                    y0 = y
                y1 = y
                if x < x0:
                    x0 = x
                if x > x1:
                    x1 = x
    return y0, y1, x0, x1


def binary_open(mask: np.ndarray, radius: int) -> np.ndarray:
    """Opening by a disk; pixels outside the image are ignored."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if radius <= 0:
        return mask.copy()
    half = _half_widths(radius)
    m = mask.view(np.uint8)
    return _erode_disk(_erode_disk(m, half, np.uint8(0)), half, np.uint8(1)).view(np.bool_)


def binary_close(mask: np.ndarray, radius: int) -> np.ndarray:
    """Closing by a disk; pixels outside the image are ignored."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if radius <= 0:
        return mask.copy()
    half = _half_widths(radius)
    m = mask.view(np.uint8)
    return _erode_disk(_erode_disk(m, half, np.uint8(1)), half, np.uint8(0)).view(np.bool_)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected labels (``int32``, 0 = background) and the component count."""
    labels, count, _ = _label8(np.ascontiguousarray(mask, dtype=np.bool_))
    return labels, count


def threshold_deviation(dev: DeviationImage, params: DetectionParams) -> np.ndarray:
    return dev.valid & (np.abs(dev.value) > params.deviation_threshold)


def _window(bounds: tuple[int, int, int, int], shape: tuple[int, int], margin: int) -> tuple[slice, slice] | None:
    y0, y1, x0, x1 = (int(b) for b in bounds)
    if y1 < 0:
        return None
    h, w = shape
    return (
        slice(max(y0 - margin, 0), min(y1 + margin + 1, h)),
        slice(max(x0 - margin, 0), min(x1 + margin + 1, w)),
    )


def _active_window(mask: np.ndarray, margin: int) -> tuple[slice, slice] | None:
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask[rows[0] : rows[-1] + 1].any(axis=0))
    return _window((rows[0], rows[-1], cols[0], cols[-1]), mask.shape, margin)


def _margin(params: DetectionParams) -> int:
    # covers every pixel the opening and closing can read or write
    return max(params.open_radius_px, 2 * params.close_radius_px) + 1


def _clean_window(mask: np.ndarray, window, params: DetectionParams, frame_index: int) -> DetectionResult:
    out = np.zeros(mask.shape, dtype=np.bool_)
    if window is None:
        return DetectionResult(out, [], frame_index)
    ys, xs = window
    sub = binary_open(mask[window], params.open_radius_px)
    sub = binary_close(sub, params.close_radius_px)
    labels, count, stats = _label8(sub)
    keep = np.zeros(count + 1, dtype=np.bool_)
    rows = []
    for lab in range(1, count + 1):
        area = int(stats[lab, 0])
        if area < params.min_area_px:
            continue
        keep[lab] = True
        rows.append((lab, area, int(stats[lab, 1]) + xs.start, int(stats[lab, 2]) + ys.start,
                     int(stats[lab, 3]) + xs.start, int(stats[lab, 4]) + ys.start))
    rows.sort(key=lambda r: (-r[1], r[3], r[2]))
    components = []
    for new_id, (lab, area, x0, y0, x1, y1) in enumerate(rows, start=1):
        cx = stats[lab, 5] / area + xs.start
        cy = stats[lab, 6] / area + ys.start
        components.append(Component(new_id, area, (x0, y0, x1, y1), (float(cx), float(cy))))
    _keep_labels(labels, keep, out[window])
    return DetectionResult(out, components, frame_index)


def clean_mask(raw: np.ndarray, params: DetectionParams, frame_index: int = 0) -> DetectionResult:
    """Open, close, label and drop small components.

    Components are sorted by area (largest first), ties broken by the top-left
    corner of the bounding box; ids follow that order starting at 1.
    """
    # Work inside the bounding box of set pixels, widened so that the result
    # equals processing the full image.
    mask = np.asarray(raw, dtype=np.bool_)
    return _clean_window(mask, _active_window(mask, _margin(params)), params, frame_index)


def detect(
    flow: FlowField, lookup: LookupImage, params: DetectionParams | None = None, frame_index: int = 0
) -> DetectionResult:
    """Deviation, threshold and cleanup in one go.

    Same result as ``clean_mask(threshold_deviation(deviation_image(...)))`` without
    materializing the deviation image.
    """
    params = params or DetectionParams()
    if flow.shape != lookup.shape:
        raise DimensionMismatch(f"image shapes differ: {flow.shape} vs {lookup.shape}")
    raw = np.empty(flow.shape, dtype=np.bool_)
    bounds = _threshold_kernel(
        flow.u, flow.v, flow.valid, lookup.radial_dir, lookup.valid,
        float(params.min_flow_mag), float(params.deviation_threshold), raw,
    )
    return _clean_window(raw, _window(bounds, raw.shape, _margin(params)), params, frame_index)


def detect_many(
    flows: list[FlowField],
    lookup: LookupImage,
    params: DetectionParams | None = None,
    workers: int = 1,
    first_index: int = 0,
) -> list[DetectionResult]:
    """Run :func:`detect` over frames, optionally on a thread pool.

    The kernels release the GIL, so frames scale with the number of cores.
    Results keep input order.
    """
    params = params or DetectionParams()
    jobs = [(f, first_index + i) for i, f in enumerate(flows)]
    if workers <= 1:
        return [detect(f, lookup, params, i) for f, i in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: detect(job[0], lookup, params, job[1]), jobs))
