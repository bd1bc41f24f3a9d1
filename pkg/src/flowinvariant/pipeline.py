"""Frame-sequence orchestration shared by the CLI subcommands."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .camera import CameraModel, FoePoint, LookupImage, foe_from_translation, synthesize_lookup
from .config import PipelineConfig
from .detection import DetectionResult, clean_mask, threshold_deviation
from .errors import InvalidConfig
from .flow import FlowField, Frame, estimate_flow
from .foe import FoeEstimate, estimate_foe
from .invariant import DeviationImage, RatioImage, deviation_image, ratio_image, residual_image

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """``map`` on a thread pool when ``workers > 1``; output keeps input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def camera_for(cfg: PipelineConfig, shape: tuple[int, int]) -> CameraModel:
    """Configured camera, or one centred on the image when none is given.

    The focal length only matters for the ``from-translation`` FOE mode, which
    therefore requires an explicit camera.
    """
    if cfg.camera is not None:
        if cfg.camera.shape != tuple(shape):
            raise InvalidConfig("camera", f"size {cfg.camera.shape} does not match images {tuple(shape)}")
        return cfg.camera
    if cfg.foe.mode == "from-translation":
        cfg.require_camera()
    h, w = shape
    return CameraModel.centered(float(max(w, h)), w, h)


def lookup_for(
    cfg: PipelineConfig, cam: CameraModel, flow: FlowField | None = None
) -> tuple[LookupImage, FoeEstimate | None]:
    mode = cfg.foe
    if mode.mode == "principal-point":
        return synthesize_lookup(cam, FoePoint.at_principal_point(cam), cfg.exclusion_radius_px), None
    if mode.mode == "from-translation":
        t = np.asarray(mode.t_dir, dtype=np.float64)
        foe = foe_from_translation(cam, t / np.linalg.norm(t))
        return synthesize_lookup(cam, foe, cfg.exclusion_radius_px), None
    if flow is None:
        raise InvalidConfig("foe.mode", "'estimate' needs flow input")
    est = estimate_foe(flow, mode.min_flow_mag, mode.ransac_iters, mode.inlier_sin_tol, mode.seed)
    return synthesize_lookup(cam, est.foe, cfg.exclusion_radius_px), est


@dataclass(eq=False)
class FrameOutput:
    index: int
    lookup: LookupImage
    foe_estimate: FoeEstimate | None
    deviation: DeviationImage
    ratio: RatioImage
    residual: DeviationImage
    detection: DetectionResult


def estimate_flows(frames: Sequence[Frame], cfg: PipelineConfig) -> list[FlowField]:
    pairs = list(zip(frames[:-1], frames[1:]))
    return ordered_map(lambda p: estimate_flow(p[0], p[1], cfg.flow), pairs, cfg.workers)


def process_flow(flow: FlowField, index: int, cfg: PipelineConfig, cam: CameraModel,
                 fixed_lookup: LookupImage | None = None) -> FrameOutput:
    if fixed_lookup is not None:
        lookup, est = fixed_lookup, None
    else:
        lookup, est = lookup_for(cfg, cam, flow)
    dev = deviation_image(flow, lookup, cfg.detection.min_flow_mag)
    result = clean_mask(threshold_deviation(dev, cfg.detection), cfg.detection, index)
    ratio = ratio_image(flow, cfg.invariant.u_epsilon)
    return FrameOutput(index, lookup, est, dev, ratio, residual_image(ratio, lookup), result)


def process_flows(flows: Sequence[FlowField], cfg: PipelineConfig, first_index: int = 0) -> list[FrameOutput]:
    if not flows:
        return []
    cam = camera_for(cfg, flows[0].shape)
    fixed = None if cfg.foe.mode == "estimate" else lookup_for(cfg, cam)[0]
    jobs = [(f, first_index + k) for k, f in enumerate(flows)]
    outputs = ordered_map(lambda j: process_flow(j[0], j[1], cfg, cam, fixed), jobs, cfg.workers)
    for out in outputs:
        if out.foe_estimate is not None:
            log.info("frame %d: FOE %s (inliers %.3f)", out.index, out.foe_estimate.foe.position,
                     out.foe_estimate.inlier_fraction)
    return outputs
