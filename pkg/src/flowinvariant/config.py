"""Pipeline configuration loaded from JSON.

Unknown keys are rejected so that a typo cannot silently fall back to a
default. Every validation failure is an :class:`InvalidConfig` naming the field.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .camera import DEFAULT_EXCLUSION_RADIUS_PX, CameraModel
from .detection import DetectionParams
from .errors import InvalidConfig, IoFailure
from .flow import FlowParams
from .invariant import DEFAULT_U_EPSILON, DEFAULT_VMAX_DEVIATION, DEFAULT_VMAX_RATIO
from .simulator import SceneConfig

FOE_MODES = ("principal-point", "from-translation", "estimate")
CHANNELS = ("deviation", "ratio")
FLOW_SOURCES = ("estimate", "ground-truth")


@dataclass(frozen=True)
class FoeMode:
    mode: str = "principal-point"
    t_dir: tuple[float, float, float] | None = None
    seed: int = 0
    ransac_iters: int = 200
    inlier_sin_tol: float = 0.05
    min_flow_mag: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in FOE_MODES:
            raise InvalidConfig("foe.mode", f"must be one of {FOE_MODES}, got {self.mode!r}")
        if self.mode == "from-translation":
            if self.t_dir is None or len(self.t_dir) != 3:
                raise InvalidConfig("foe.t_dir", "from-translation needs a 3-vector t_dir")
            norm = math.sqrt(sum(c * c for c in self.t_dir))
            if not norm > 0:
                raise InvalidConfig("foe.t_dir", "must be non-zero")
        elif self.t_dir is not None:
            raise InvalidConfig("foe.t_dir", f"only valid with mode 'from-translation', not {self.mode!r}")
        if int(self.ransac_iters) != self.ransac_iters or self.ransac_iters < 1:
            raise InvalidConfig("foe.ransac_iters", "must be an integer >= 1")
        if not (0 < self.inlier_sin_tol < 1):
            raise InvalidConfig("foe.inlier_sin_tol", "must lie in (0, 1)")
        if not self.min_flow_mag > 0:
            raise InvalidConfig("foe.min_flow_mag", "must be > 0")

    def to_dict(self) -> dict:
        d = {"mode": self.mode}
        if self.mode == "from-translation":
            d["t_dir"] = list(self.t_dir)
        if self.mode == "estimate":
            d.update(
                seed=self.seed,
                ransac_iters=self.ransac_iters,
                inlier_sin_tol=self.inlier_sin_tol,
                min_flow_mag=self.min_flow_mag,
            )
        return d


@dataclass(frozen=True)
class InvariantSettings:
    channel: str = "deviation"
    u_epsilon: float = DEFAULT_U_EPSILON
    vmax_ratio: float = DEFAULT_VMAX_RATIO
    vmax_deviation: float = DEFAULT_VMAX_DEVIATION

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise InvalidConfig("invariant.channel", f"must be one of {CHANNELS}")
        for name in ("u_epsilon", "vmax_ratio", "vmax_deviation"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"invariant.{name}", "must be > 0")


@dataclass(frozen=True)
class PipelineConfig:
    camera: CameraModel | None = None
    flow: FlowParams = field(default_factory=FlowParams)
    detection: DetectionParams = field(default_factory=DetectionParams)
    foe: FoeMode = field(default_factory=FoeMode)
    invariant: InvariantSettings = field(default_factory=InvariantSettings)
    exclusion_radius_px: float = DEFAULT_EXCLUSION_RADIUS_PX
    flow_source: str = "estimate"
    scene: SceneConfig | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.exclusion_radius_px >= 0:
            raise InvalidConfig("exclusion_radius_px", "must be >= 0")
        if self.flow_source not in FLOW_SOURCES:
            raise InvalidConfig("flow_source", f"must be one of {FLOW_SOURCES}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise InvalidConfig("workers", "must be an integer >= 1")
        if self.camera is None and self.scene is not None:
            object.__setattr__(self, "camera", self.scene.camera)

    def require_camera(self) -> CameraModel:
        if self.camera is None:
            raise InvalidConfig("camera", "required (give 'camera' or a 'scene')")
        return self.camera

    def with_seed(self, seed: int | None) -> PipelineConfig:
        """Apply a ``--seed`` override to the scene and the FOE estimator."""
        if seed is None:
            return self
        scene = self.scene
        if scene is not None:
            scene = SceneConfig.from_dict({**scene.to_dict(), "seed": int(seed)})
        foe = FoeMode(**{**asdict(self.foe), "seed": int(seed)})
        return PipelineConfig(
            self.camera, self.flow, self.detection, foe, self.invariant,
            self.exclusion_radius_px, self.flow_source, scene, self.workers,
        )

    def to_dict(self) -> dict:
        d = {
            "flow": asdict(self.flow),
            "detection": asdict(self.detection),
            "foe": self.foe.to_dict(),
            "invariant": asdict(self.invariant),
            "exclusion_radius_px": self.exclusion_radius_px,
            "flow_source": self.flow_source,
            "workers": self.workers,
        }
        if self.camera is not None:
            d["camera"] = self.camera.to_dict()
        if self.scene is not None:
            d["scene"] = self.scene.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        if not isinstance(d, dict):
            raise InvalidConfig("config", "top level must be a JSON object")
        _reject_unknown("", d, {f.name for f in fields(cls)})
        scene = SceneConfig.from_dict(d["scene"]) if d.get("scene") is not None else None
        camera = CameraModel.from_dict(d["camera"]) if d.get("camera") is not None else None
        return cls(
            camera=camera,
            flow=_build(FlowParams, "flow", d.get("flow", {})),
            detection=_build(DetectionParams, "detection", d.get("detection", {})),
            foe=_build_foe(d.get("foe", {})),
            invariant=_build(InvariantSettings, "invariant", d.get("invariant", {})),
            exclusion_radius_px=_num("exclusion_radius_px", d.get("exclusion_radius_px", DEFAULT_EXCLUSION_RADIUS_PX)),
            flow_source=d.get("flow_source", "estimate"),
            scene=scene,
            workers=d.get("workers", 1),
        )


def _num(name: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidConfig(name, f"must be a number, got {value!r}")
    return float(value)


def _reject_unknown(prefix: str, d: dict, allowed: set[str]) -> None:
    for key in d:
        if key not in allowed:
            raise InvalidConfig(f"{prefix}{key}", "unknown key")


def _build(cls, prefix: str, d: dict):
    if not isinstance(d, dict):
        raise InvalidConfig(prefix, "must be a JSON object")
    _reject_unknown(prefix + ".", d, {f.name for f in fields(cls)})
    for key, value in d.items():
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise InvalidConfig(f"{prefix}.{key}", f"unsupported value {value!r}")
    return cls(**d)


def _build_foe(d: dict) -> FoeMode:
    if not isinstance(d, dict):
        raise InvalidConfig("foe", "must be a JSON object")
    _reject_unknown("foe.", d, {f.name for f in fields(FoeMode)})
    d = dict(d)
    if d.get("t_dir") is not None:
        d["t_dir"] = tuple(float(c) for c in d["t_dir"])
    return FoeMode(**d)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig("config", f"not valid JSON: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    if isinstance(raw, dict) and "scene" not in raw and "camera" in raw and "frame_count" in raw:
        # a bare scene description
        raw = {"scene": raw}
    return PipelineConfig.from_dict(raw)
