"""Moving-object detection from a translating camera.

Dense optical flow is compared against a per-pixel lookup of the radial
direction about the focus of expansion. Static scenery flows exactly along
that direction whatever its depth or the camera speed, so pixels whose flow
turns away from it are flagged as moving.
"""

from .camera import (
    AngularCoords,
    CameraModel,
    FoePoint,
    LookupImage,
    angles_to_pixel,
    azimuth_about,
    foe_from_translation,
    pixel_to_angles,
    project,
    synthesize_lookup,
)
from .config import PipelineConfig, load_config
from .detection import Component, DetectionParams, DetectionResult, detect, detect_many
from .errors import (
    BadMagic,
    BehindCamera,
    Degenerate,
    DimensionMismatch,
    FlowInvariantError,
    FrameTooSmall,
    InsufficientFlow,
    InvalidConfig,
    IoFailure,
    LateralMotion,
    TruncatedFile,
    UnsupportedFormat,
)
from .evaluation import EvalReport, FrameMetrics, eval_masks
from .flow import FlowField, FlowParams, Frame, build_pyramid, estimate_flow
from .foe import FoeEstimate, estimate_foe
from .formats import read_flow, read_frame, read_mask, write_flow, write_frame, write_mask
from .invariant import (
    DeviationImage,
    RatioImage,
    deviation_image,
    ratio_image,
    render_invariant,
    residual_image,
)
from .simulator import (
    BackgroundSpec,
    GroundTruthFrame,
    MoverSpec,
    Scene,
    SceneConfig,
    SpeedProfile,
    analytic_flow,
    build_scene,
    export_sequence,
    render_frame,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
