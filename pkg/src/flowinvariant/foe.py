"""Focus-of-expansion estimation from a flow field.

Each RANSAC hypothesis is the intersection of the flow lines through two
sampled pixels. Hypotheses are scored by how many flow vectors point (within
``inlier_sin_tol``) along the ray from the hypothesis; the winner is refined by
weighted linear least squares over its inliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import FoePoint
from .errors import Degenerate, InsufficientFlow, InvalidConfig
from .flow import FlowField

MIN_CANDIDATES = 100
MIN_INLIER_FRACTION = 0.5
_SCORE_SAMPLE = 20000
_REFINE_ROUNDS = 5


@dataclass(frozen=True)
class FoeEstimate:
    foe: FoePoint
    inlier_fraction: float
    rms_sin_deviation: float

    def to_dict(self) -> dict:
        return {
            "foe": list(self.foe.position),
            "source": self.foe.source,
            "inlier_fraction": self.inlier_fraction,
            "rms_sin_deviation": self.rms_sin_deviation,
        }


def _sin_dev(px, py, fx, fy, ex, ey):
    """|sin| of the angle between unit flow ``(fx, fy)`` and the ray ``p - e``."""
    rx = px - ex
    ry = py - ey
    r = np.hypot(rx, ry)
    cross = np.abs(rx * fy - ry * fx)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, cross / np.where(r > 0, r, 1.0), 0.0)


def _least_squares(px, py, fx, fy, w):
    """Minimise ``sum w * cross(p - e, f)^2`` over ``e``; None if ill-conditioned."""
    # cross(p - e, f) = (px*fy - py*fx) - fy*ex + fx*ey
    a0 = fy
    a1 = -fx
    b = px * fy - py * fx
    m00 = np.sum(w * a0 * a0)
    m01 = np.sum(w * a0 * a1)
    m11 = np.sum(w * a1 * a1)
    r0 = np.sum(w * a0 * b)
    r1 = np.sum(w * a1 * b)
    normal = np.array([[m00, m01], [m01, m11]])
    eig = np.linalg.eigvalsh(normal)
    if eig[1] <= 0 or eig[0] / eig[1] < 1e-8:
        return None
    ex, ey = np.linalg.solve(normal, np.array([r0, r1]))
    return float(ex), float(ey)


def estimate_foe(
    flow: FlowField,
    min_flow_mag: float = 0.5,
    ransac_iters: int = 200,
    inlier_sin_tol: float = 0.05,
    seed: int = 0,
) -> FoeEstimate:
    if not min_flow_mag > 0:
        raise InvalidConfig("foe.min_flow_mag", "must be > 0")
    if int(ransac_iters) != ransac_iters or ransac_iters < 1:
        raise InvalidConfig("foe.ransac_iters", "must be an integer >= 1")
    if not (0 < inlier_sin_tol < 1):
        raise InvalidConfig("foe.inlier_sin_tol", "must lie in (0, 1)")

    mag = flow.magnitude()
    cand = flow.valid & (mag >= min_flow_mag)
    ys, xs = np.nonzero(cand)
    n = xs.size
    if n < MIN_CANDIDATES:
        raise InsufficientFlow(f"{n} pixels with |flow| >= {min_flow_mag}; need {MIN_CANDIDATES}")
    px = xs.astype(np.float64)
    py = ys.astype(np.float64)
    fx = flow.u[cand] / mag[cand]
    fy = flow.v[cand] / mag[cand]

    rng = np.random.default_rng(seed)
    if n > _SCORE_SAMPLE:
        sub = np.sort(rng.choice(n, _SCORE_SAMPLE, replace=False))
    else:
        sub = np.arange(n)

    i = rng.integers(0, n, ransac_iters)
    j = rng.integers(0, n - 1, ransac_iters)
    j = np.where(j >= i, j + 1, j)
    # homogeneous flow lines l = p x (p + f); intersection e = l_i x l_j
    lines = np.stack([-fy, fx, px * fy - py * fx], axis=1)
    hyp = np.cross(lines[i], lines[j])
    finite = np.abs(hyp[:, 2]) > 1e-12 * np.linalg.norm(hyp[:, :2], axis=1)

    best = None
    best_count = -1
    for k in np.flatnonzero(finite):
        ex = hyp[k, 0] / hyp[k, 2]
        ey = hyp[k, 1] / hyp[k, 2]
        count = int(np.count_nonzero(_sin_dev(px[sub], py[sub], fx[sub], fy[sub], ex, ey) <= inlier_sin_tol))
        if count > best_count:
            best_count = count
            best = (ex, ey)
    if best is None:
        raise Degenerate("all sampled flow lines are parallel; FOE at infinity")

    ex, ey = best
    inliers = _sin_dev(px, py, fx, fy, ex, ey) <= inlier_sin_tol
    for _ in range(_REFINE_ROUNDS):
        if np.count_nonzero(inliers) < 2:
            break
        # weights turn the cross product into the sine of the angular error
        r2 = (px[inliers] - ex) ** 2 + (py[inliers] - ey) ** 2
        w = 1.0 / np.maximum(r2, 1.0)
        solved = _least_squares(px[inliers], py[inliers], fx[inliers], fy[inliers], w)
        if solved is None:
            raise Degenerate("flow lines are nearly parallel; FOE is ill-conditioned")
        ex, ey = solved
        new_inliers = _sin_dev(px, py, fx, fy, ex, ey) <= inlier_sin_tol
        if np.array_equal(new_inliers, inliers):
            break
        inliers = new_inliers

    fraction = float(np.count_nonzero(inliers)) / n
    if fraction < MIN_INLIER_FRACTION:
        raise Degenerate(f"best FOE hypothesis explains only {fraction:.1%} of the flow")
    if not (math.isfinite(ex) and math.isfinite(ey)):
        raise Degenerate("FOE estimate is not finite")
    dev = _sin_dev(px[inliers], py[inliers], fx[inliers], fy[inliers], ex, ey)
    rms = float(np.sqrt(np.mean(dev**2))) if dev.size else 0.0
    return FoeEstimate(FoePoint((ex, ey), "estimated"), fraction, rms)
