"""Synthetic scenes seen from a translating pinhole camera.

A scene holds static 3D points, rigidly translating mover point clouds and a
textured background plane. Every point is drawn as a small camera-facing disc
(a Gaussian intensity sprite), so ground-truth flow at each covered pixel is
that of the 3D surface point seen through that pixel at the disc's depth. For
static content this is exactly radial about the FOE, whatever the depth.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import ndimage

from .camera import BEHIND_EPS, CameraModel, FoePoint, foe_from_translation
from .errors import InvalidConfig, IoFailure, LateralMotion
from .flow import Frame, FlowField

MAX_FLOW_PX = 16.0
DEFAULT_DT = 1.0 / 30.0
SPRITE_INTENSITY = (0.55, 1.0)
BACKGROUND_INTENSITY = (0.02, 0.48)
_LATTICE = 64


@dataclass(frozen=True)
class SpeedProfile:
    """``v(t) = v0 + accel * t`` along the translation direction (m/s)."""

    kind: str = "constant"
    v0: float = 1.0
    accel: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "linear"):
            raise InvalidConfig("speed_profile.kind", f"must be 'constant' or 'linear', got {self.kind!r}")
        if not (math.isfinite(self.v0) and math.isfinite(self.accel)):
            raise InvalidConfig("speed_profile", "speeds must be finite")
        if self.kind == "constant" and self.accel != 0.0:
            raise InvalidConfig("speed_profile.accel", "a constant profile has no acceleration")

    def distance(self, t: float) -> float:
        return self.v0 * t + 0.5 * self.accel * t * t

    def speed(self, t: float) -> float:
        return self.v0 + self.accel * t


@dataclass(frozen=True)
class MoverSpec:
    center: tuple[float, float, float]
    half_extent: tuple[float, float, float]
    world_velocity: tuple[float, float, float]
    point_count: int = 400


@dataclass(frozen=True)
class BackgroundSpec:
    seed: int = 0
    octaves: int = 3
    base_cell_px: float = 8.0


@dataclass(frozen=True)
class SceneConfig:
    camera: CameraModel
    t_dir: tuple[float, float, float] = (0.0, 0.0, 1.0)
    speed_profile: SpeedProfile = field(default_factory=SpeedProfile)
    frame_count: int = 10
    dt: float = DEFAULT_DT
    static_point_count: int = 2000
    range_min: float = 2.0
    range_max: float = 50.0
    sprite_radius_px: float = 2.0
    movers: tuple[MoverSpec, ...] = ()
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_dir", tuple(float(c) for c in self.t_dir))
        object.__setattr__(self, "movers", tuple(self.movers))
        if len(self.t_dir) != 3 or abs(math.sqrt(sum(c * c for c in self.t_dir)) - 1.0) > 1e-9:
            raise InvalidConfig("t_dir", "must be a unit 3-vector (within 1e-9)")
        try:
            foe_from_translation(self.camera, self.t_dir)
        except LateralMotion:
            raise InvalidConfig("t_dir", "needs a forward/backward component (lateral motion unsupported)") from None
        if int(self.frame_count) != self.frame_count or self.frame_count < 2:
            raise InvalidConfig("frame_count", "must be an integer >= 2")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidConfig("dt", "must be > 0")
        if int(self.static_point_count) != self.static_point_count or self.static_point_count < 0:
            raise InvalidConfig("static_points.count", "must be an integer >= 0")
        if not self.range_min > 0:
            raise InvalidConfig("static_points.range_min", "must be > 0")
        if not (self.range_max >= self.range_min and math.isfinite(self.range_max)):
            raise InvalidConfig("static_points.range_max", "must be finite and >= range_min")
        if not self.sprite_radius_px > 0:
            raise InvalidConfig("static_points.sprite_radius_px", "must be > 0")
        for k, m in enumerate(self.movers):
            if int(m.point_count) != m.point_count or m.point_count < 1:
                raise InvalidConfig(f"movers[{k}].point_count", "must be an integer >= 1")
            if any(not (h >= 0) for h in m.half_extent):
                raise InvalidConfig(f"movers[{k}].half_extent", "must be non-negative")
            if not all(math.isfinite(c) for c in (*m.center, *m.world_velocity)):
                raise InvalidConfig(f"movers[{k}]", "center and velocity must be finite")
        if int(self.background.octaves) != self.background.octaves or self.background.octaves < 1:
            raise InvalidConfig("background.octaves", "must be an integer >= 1")
        if not self.background.base_cell_px > 0:
            raise InvalidConfig("background.base_cell_px", "must be > 0")

    @property
    def duration(self) -> float:
        return (self.frame_count - 1) * self.dt

    @property
    def plane_depth(self) -> float:
        return 2.0 * self.range_max

    def frame_time(self, index: int) -> float:
        return index * self.dt

    def to_dict(self) -> dict:
        sp = self.speed_profile
        speed = {"kind": sp.kind, "v0": sp.v0} if sp.kind == "constant" else asdict(sp)
        return {
            "camera": self.camera.to_dict(),
            "t_dir": list(self.t_dir),
            "speed_profile": speed,
            "frame_count": self.frame_count,
            "dt": self.dt,
            "static_points": {
                "count": self.static_point_count,
                "range_min": self.range_min,
                "range_max": self.range_max,
                "sprite_radius_px": self.sprite_radius_px,
            },
            "movers": [
                {
                    "center": list(m.center),
                    "half_extent": list(m.half_extent),
                    "world_velocity": list(m.world_velocity),
                    "point_count": m.point_count,
                }
                for m in self.movers
            ],
            "background": asdict(self.background),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SceneConfig:
        if "camera" not in d:
            raise InvalidConfig("camera", "missing")
        cam = CameraModel.from_dict(d["camera"])
        sp = d.get("speed_profile", {})
        static = d.get("static_points", {})
        try:
            movers = tuple(
                MoverSpec(
                    tuple(float(c) for c in m["center"]),
                    tuple(float(c) for c in m["half_extent"]),
                    tuple(float(c) for c in m["world_velocity"]),
                    int(m.get("point_count", 400)),
                )
                for m in d.get("movers", [])
            )
        except KeyError as exc:
            raise InvalidConfig(f"movers.{exc.args[0]}", "missing") from None
        bg = d.get("background", {})
        return cls(
            camera=cam,
            t_dir=tuple(d.get("t_dir", (0.0, 0.0, 1.0))),
            speed_profile=SpeedProfile(
                sp.get("kind", "constant"), float(sp.get("v0", 1.0)), float(sp.get("accel", 0.0))
            ),
            frame_count=d.get("frame_count", 10),
            dt=float(d.get("dt", DEFAULT_DT)),
            static_point_count=static.get("count", 2000),
            range_min=float(static.get("range_min", 2.0)),
            range_max=float(static.get("range_max", 50.0)),
            sprite_radius_px=float(static.get("sprite_radius_px", 2.0)),
            movers=movers,
            background=BackgroundSpec(
                int(bg.get("seed", 0)), bg.get("octaves", 3), float(bg.get("base_cell_px", 8.0))
            ),
            seed=int(d.get("seed", 0)),
        )


@dataclass(eq=False)
class Scene:
    config: SceneConfig
    static_points: np.ndarray  # (N, 3) world coordinates
    static_intensity: np.ndarray
    mover_points: np.ndarray  # (M, 3) world coordinates at t = 0
    mover_index: np.ndarray  # (M,) index into config.movers
    mover_intensity: np.ndarray
    texture: np.ndarray  # (octaves, L, L) lattice values

    @property
    def camera(self) -> CameraModel:
        return self.config.camera

    def mover_velocities(self) -> np.ndarray:
        if not self.config.movers:
            return np.zeros((0, 3))
        vel = np.array([m.world_velocity for m in self.config.movers], dtype=np.float64)
        return vel[self.mover_index]


@dataclass(eq=False)
class GroundTruthFrame:
    flow: FlowField
    instantaneous_flow: FlowField
    moving_mask: np.ndarray
    foe: FoePoint
    camera_position: np.ndarray
    mover_labels: np.ndarray  # 0 = not a mover, k = movers[k - 1]
    time: float = 0.0


def camera_position(config: SceneConfig, t: float) -> np.ndarray:
    if t < 0:
        raise InvalidConfig("t", "must be >= 0")
    return np.asarray(config.t_dir) * config.speed_profile.distance(t)


def camera_velocity(config: SceneConfig, t: float) -> np.ndarray:
    return np.asarray(config.t_dir) * config.speed_profile.speed(t)


def _sample_static(config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    cam = config.camera
    n = config.static_point_count
    x = rng.uniform(-0.5, cam.width - 0.5, n)
    y = rng.uniform(-0.5, cam.height - 0.5, n)
    r = rng.uniform(config.range_min, config.range_max, n)
    rays = np.stack(
        [(x - cam.principal_point[0]) / cam.focal_length_px, (y - cam.principal_point[1]) / cam.focal_length_px, np.ones(n)],
        axis=1,
    )
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    return rays * r[:, None]


def _point_flow_px(cam: CameraModel, rel: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Displacement flow magnitude of camera-frame points ``rel`` moving by ``delta``."""
    f = cam.focal_length_px
    Z = rel[:, 2]
    Z1 = Z + delta[:, 2]
    dx = f * rel[:, 0] / Z
    dy = f * rel[:, 1] / Z
    u = (f * delta[:, 0] - dx * delta[:, 2]) / Z1
    v = (f * delta[:, 1] - dy * delta[:, 2]) / Z1
    return np.hypot(u, v)


def _visible(cam: CameraModel, rel: np.ndarray) -> np.ndarray:
    Z = rel[:, 2]
    ok = Z > BEHIND_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        x = cam.principal_point[0] + cam.focal_length_px * rel[:, 0] / Z
        y = cam.principal_point[1] + cam.focal_length_px * rel[:, 1] / Z
    return ok & (x >= -0.5) & (x < cam.width - 0.5) & (y >= -0.5) & (y < cam.height - 0.5)


def _check_flow_cap(scene: Scene) -> None:
    cfg = scene.config
    cam = cfg.camera
    vel = scene.mover_velocities()
    h, w = cam.height, cam.width
    cx, cy = cam.principal_point
    corners = np.array([[-cx, -cy], [w - 1 - cx, -cy], [-cx, h - 1 - cy], [w - 1 - cx, h - 1 - cy]])
    for k in range(cfg.frame_count - 1):
        t0 = cfg.frame_time(k)
        t1 = t0 + cfg.dt
        c0 = camera_position(cfg, t0)
        step = camera_position(cfg, t1) - c0
        plane_z = cfg.plane_depth - c0[2]
        if plane_z - step[2] <= cfg.range_min or plane_z <= cfg.range_min:
            raise InvalidConfig("frame_count", "camera reaches the background plane")
        # background plane, worst case at the image corners
        Z1 = plane_z + (-step[2])
        bu = (-cam.focal_length_px * step[0] + corners[:, 0] * step[2]) / Z1
        bv = (-cam.focal_length_px * step[1] + corners[:, 1] * step[2]) / Z1
        worst = float(np.max(np.hypot(bu, bv)))
        groups = [(scene.static_points, np.zeros_like(scene.static_points))]
        if scene.mover_points.size:
            groups.append((scene.mover_points + vel * t0, vel * cfg.dt))
        for pts, moved in groups:
            if pts.size == 0:
                continue
            rel = pts - c0
            delta = moved - step
            vis = _visible(cam, rel) & (rel[:, 2] + delta[:, 2] > BEHIND_EPS)
            if np.any(vis):
                worst = max(worst, float(np.max(_point_flow_px(cam, rel[vis], delta[vis]))))
        if worst > MAX_FLOW_PX:
            raise InvalidConfig(
                "speed_profile",
                f"image flow reaches {worst:.2f} px/frame between frames {k} and {k + 1} "
                f"(limit {MAX_FLOW_PX}); lower the speed or raise range_min",
            )


def build_scene(config: SceneConfig) -> Scene:
    rng = np.random.default_rng(config.seed)
    static = _sample_static(config, rng)
    static_int = rng.uniform(*SPRITE_INTENSITY, config.static_point_count)
    pts, idx = [], []
    for k, m in enumerate(config.movers):
        c = np.asarray(m.center, dtype=np.float64)
        he = np.asarray(m.half_extent, dtype=np.float64)
        pts.append(c + rng.uniform(-1.0, 1.0, (m.point_count, 3)) * he)
        idx.append(np.full(m.point_count, k, dtype=np.int64))
    mover_pts = np.concatenate(pts) if pts else np.zeros((0, 3))
    mover_idx = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
    mover_int = rng.uniform(*SPRITE_INTENSITY, mover_pts.shape[0])
    bg_rng = np.random.default_rng(config.background.seed)
    texture = bg_rng.uniform(0.0, 1.0, (config.background.octaves, _LATTICE, _LATTICE))
    scene = Scene(config, static, static_int, mover_pts, mover_idx, mover_int, texture)
    _check_flow_cap(scene)
    return scene


@dataclass
class _Layer:
    """Per-pixel winner of the depth test at one time instant."""

    depth: np.ndarray  # camera-frame Z of the visible surface
    owner: np.ndarray  # -1 background, else index into the stacked point list
    delta_vel: np.ndarray  # (H, W, 3) world velocity of the visible surface


def _stack_points(scene: Scene, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """World positions, velocities, mover label (0 static) and intensity at time ``t``."""
    vel_m = scene.mover_velocities()
    pos = np.concatenate([scene.static_points, scene.mover_points + vel_m * t])
    vel = np.concatenate([np.zeros_like(scene.static_points), vel_m])
    label = np.concatenate([np.zeros(len(scene.static_points), dtype=np.int64), scene.mover_index + 1])
    inten = np.concatenate([scene.static_intensity, scene.mover_intensity])
    return pos, vel, label, inten


def _footprints(cam: CameraModel, x: np.ndarray, y: np.ndarray, radius: float):
    """Pixel indices covered by discs of ``radius`` around ``(x, y)``."""
    reach = int(math.ceil(radius)) + 1
    oy, ox = np.mgrid[-reach : reach + 1, -reach : reach + 1]
    ox = ox.ravel()
    oy = oy.ravel()
    bx = np.floor(x).astype(np.int64)[:, None] + ox[None, :]
    by = np.floor(y).astype(np.int64)[:, None] + oy[None, :]
    d2 = (bx - x[:, None]) ** 2 + (by - y[:, None]) ** 2
    inside = (d2 <= radius * radius) & (bx >= 0) & (bx < cam.width) & (by >= 0) & (by < cam.height)
    point = np.broadcast_to(np.arange(len(x))[:, None], bx.shape)
    return point[inside], by[inside], bx[inside]


def _resolve_layer(scene: Scene, t: float) -> tuple[_Layer, np.ndarray]:
    cfg = scene.config
    cam = cfg.camera
    h, w = cam.height, cam.width
    c = camera_position(cfg, t)
    pos, vel, label, _ = _stack_points(scene, t)
    rel = pos - c
    Z = rel[:, 2]
    front = Z > BEHIND_EPS
    idx = np.flatnonzero(front)
    x = cam.principal_point[0] + cam.focal_length_px * rel[idx, 0] / Z[idx]
    y = cam.principal_point[1] + cam.focal_length_px * rel[idx, 1] / Z[idx]
    near = np.abs(x - cam.principal_point[0]) < 4 * w + 10
    near &= np.abs(y - cam.principal_point[1]) < 4 * h + 10
    idx, x, y = idx[near], x[near], y[near]

    plane_z = cfg.plane_depth - c[2]
    depth = np.full((h, w), plane_z)
    owner = np.full((h, w), -1, dtype=np.int64)
    if idx.size:
        k, py, px = _footprints(cam, x, y, cfg.sprite_radius_px)
        pidx = idx[k]
        zc = Z[pidx]
        in_front = zc < plane_z
        pidx, py, px, zc = pidx[in_front], py[in_front], px[in_front], zc[in_front]
        flat = py * w + px
        # nearest point wins; ties go to the lower point index
        order = np.lexsort((pidx, zc, flat))
        flat_sorted = flat[order]
        first = np.ones(order.size, dtype=bool)
        first[1:] = flat_sorted[1:] != flat_sorted[:-1]
        win = order[first]
        depth.ravel()[flat[win]] = zc[win]
        owner.ravel()[flat[win]] = pidx[win]
    surf_vel = np.zeros((h, w, 3))
    has = owner >= 0
    surf_vel[has] = vel[owner[has]]
    mover_labels = np.zeros((h, w), dtype=np.int64)
    mover_labels[has] = label[owner[has]]
    return _Layer(depth, owner, surf_vel), mover_labels


def moving_mask(scene: Scene, t: float) -> np.ndarray:
    _, labels = _resolve_layer(scene, t)
    return labels > 0


def analytic_flow(scene: Scene, t: float) -> GroundTruthFrame:
    """Ground-truth flow from ``t`` to ``t + dt`` plus the instantaneous flow at ``t``."""
    cfg = scene.config
    cam = cfg.camera
    if t < 0 or t + cfg.dt > cfg.duration + 1e-9 * max(1.0, cfg.duration):
        raise InvalidConfig("t", f"t={t} and t+dt must lie within [0, {cfg.duration}]")
    layer, labels = _resolve_layer(scene, t)
    f = cam.focal_length_px
    xs, ys = cam.pixel_grid()
    dx = xs - cam.principal_point[0]
    dy = ys - cam.principal_point[1]
    Z = layer.depth

    c0 = camera_position(cfg, t)
    step = camera_position(cfg, t + cfg.dt) - c0
    delta = layer.delta_vel * cfg.dt - step
    Z1 = Z + delta[..., 2]
    ok = Z1 > BEHIND_EPS
    Z1s = np.where(ok, Z1, 1.0)
    u = (f * delta[..., 0] - dx * delta[..., 2]) / Z1s
    v = (f * delta[..., 1] - dy * delta[..., 2]) / Z1s
    disp = FlowField(u, v, ok)

    rel_vel = layer.delta_vel - camera_velocity(cfg, t)
    ui = (f * rel_vel[..., 0] - dx * rel_vel[..., 2]) / Z * cfg.dt
    vi = (f * rel_vel[..., 1] - dy * rel_vel[..., 2]) / Z * cfg.dt
    inst = FlowField(ui, vi, np.ones_like(ok))
    return GroundTruthFrame(
        flow=disp,
        instantaneous_flow=inst,
        moving_mask=labels > 0,
        foe=foe_from_translation(cam, cfg.t_dir),
        camera_position=c0,
        mover_labels=labels,
        time=t,
    )


def point_image_velocity(cam: CameraModel, point_cam, velocity_cam) -> tuple[float, float]:
    """Instantaneous image velocity (px/s) of a camera-frame point moving at ``velocity_cam``."""
    X, Y, Z = (float(c) for c in point_cam)
    Xd, Yd, Zd = (float(c) for c in velocity_cam)
    f = cam.focal_length_px
    xo = f * X / Z
    yo = f * Y / Z
    return (f * Xd - xo * Zd) / Z, (f * Yd - yo * Zd) / Z


def background_texture(scene: Scene, t: float) -> np.ndarray:
    """Intensity of the background plane as seen at time ``t``."""
    cfg = scene.config
    cam = cfg.camera
    c = camera_position(cfg, t)
    plane_z = cfg.plane_depth - c[2]
    xs, ys = cam.pixel_grid()
    f = cam.focal_length_px
    wx = c[0] + (xs - cam.principal_point[0]) * plane_z / f
    wy = c[1] + (ys - cam.principal_point[1]) * plane_z / f
    cell = cfg.background.base_cell_px * cfg.plane_depth / f
    total = np.zeros_like(xs)
    norm = 0.0
    for k in range(cfg.background.octaves):
        amp = 0.5**k
        ck = cell / 2**k
        # unfiltered cubic B-spline: a convex blend of lattice values, stays in [0, 1]
        total += amp * ndimage.map_coordinates(
            scene.texture[k], [wy / ck, wx / ck], order=3, mode="grid-wrap", prefilter=False
        )
        norm += amp
    val = total / norm
    lo, hi = BACKGROUND_INTENSITY
    # stretch the blend's narrow spread around 0.5 back over the intensity band
    return np.clip(0.5 * (lo + hi) + (val - 0.5) * 3.0 * (hi - lo), lo, hi)


@numba.njit(cache=True)
def _composite(img, xs, ys, inten, radius):
    h, w = img.shape
    sigma2 = 2.0 * (radius / 2.0) ** 2
    r2 = radius * radius
    reach = int(math.ceil(radius))
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        x0 = int(math.floor(x)) - reach
        y0 = int(math.floor(y)) - reach
        for py in range(max(y0, 0), min(y0 + 2 * reach + 2, h)):
            for px in range(max(x0, 0), min(x0 + 2 * reach + 2, w)):
                d2 = (px - x) ** 2 + (py - y) ** 2
                if d2 <= r2:
                    a = math.exp(-d2 / sigma2)
                    img[py, px] = img[py, px] * (1.0 - a) + inten[i] * a


def render_frame(scene: Scene, t: float) -> Frame:
    """Background texture with Gaussian sprites composited far to near."""
    cfg = scene.config
    cam = cfg.camera
    img = background_texture(scene, t)
    c = camera_position(cfg, t)
    pos, _, _, inten = _stack_points(scene, t)
    if pos.size:
        rel = pos - c
        Z = rel[:, 2]
        keep = (Z > BEHIND_EPS) & (Z < cfg.plane_depth - c[2])
        idx = np.flatnonzero(keep)
        x = cam.principal_point[0] + cam.focal_length_px * rel[idx, 0] / Z[idx]
        y = cam.principal_point[1] + cam.focal_length_px * rel[idx, 1] / Z[idx]
        r = cfg.sprite_radius_px
        onscreen = (x > -r - 1) & (x < cam.width + r) & (y > -r - 1) & (y < cam.height + r)
        idx, x, y = idx[onscreen], x[onscreen], y[onscreen]
        # far first; equal depths keep the higher index underneath
        order = np.lexsort((-idx, -Z[idx]))
        _composite(img, x[order], y[order], inten[idx][order], float(r))
    return Frame(np.clip(img, 0.0, 1.0))


def export_sequence(scene: Scene, output_dir: str | os.PathLike) -> dict:
    """Write frames, pairwise ground-truth flow, masks and ``manifest.json``."""
    from .formats import write_flow, write_frame, write_mask

    cfg = scene.config
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise PermissionError(f"{out} is not writable")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc

    frames, flows, masks, positions = [], [], [], []
    try:
        for k in range(cfg.frame_count):
            t = cfg.frame_time(k)
            name = f"frame_{k:06d}.png"
            write_frame(out / name, render_frame(scene, t))
            frames.append(name)
            if k < cfg.frame_count - 1:
                gt = analytic_flow(scene, t)
                mask = gt.moving_mask
                fname = f"flow_{k:06d}.flo"
                write_flow(out / fname, gt.flow)
                flows.append(fname)
            else:
                mask = moving_mask(scene, t)
            mname = f"mask_{k:06d}.png"
            write_mask(out / mname, mask)
            masks.append(mname)
            positions.append([float(c) for c in camera_position(cfg, t)])
        foe = foe_from_translation(cfg.camera, cfg.t_dir)
        manifest = {
            "config": cfg.to_dict(),
            "foe": foe.to_dict(),
            "frames": frames,
            "flows": flows,
            "masks": masks,
            "camera_positions": positions,
            "frame_times": [cfg.frame_time(k) for k in range(cfg.frame_count)],
            "flow_format": "Middlebury .flo (float32 u,v little-endian); NaN marks invalid pixels; "
            "flow_k maps frame k to frame k+1",
        }
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return manifest
