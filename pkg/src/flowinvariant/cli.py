"""Command-line entry point: ``flowinvariant <subcommand> ...``.

Exit status is 0 on success, 2 for usage or configuration errors (the
offending field is printed on stderr) and 1 for any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats, plotting
from .camera import FoePoint, synthesize_lookup
from .config import PipelineConfig, load_config
from .errors import FlowInvariantError, InvalidConfig, IoFailure
from .evaluation import eval_masks, exclusion_mask
from .flow import FlowField, Frame
from .invariant import quadrant_corner, render_invariant
from .pipeline import FrameOutput, camera_for, estimate_flows, lookup_for, process_flows
from .simulator import build_scene, export_sequence

log = logging.getLogger("flowinvariant")

RESOLVED_CONFIG = "resolved_config.json"


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {path}: {exc}") from exc
    return path


def _dump_json(path: Path, obj) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _echo_config(out: Path, cfg: PipelineConfig) -> None:
    _dump_json(out / RESOLVED_CONFIG, cfg.to_dict())


def _list(path: Path, prefix: str, suffixes: tuple[str, ...]) -> list[Path]:
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise IoFailure(f"{path} does not exist")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in suffixes)
    preferred = [p for p in files if p.name.startswith(prefix)]
    return preferred or files


def _frame_index(p: Path, default: int) -> int:
    digits = "".join(ch for ch in p.stem.split("_")[-1] if ch.isdigit())
    return int(digits) if digits else default


def _load_frames(path: Path) -> list[Frame]:
    files = _list(path, "frame_", (".png", ".pgm"))
    if len(files) < 2:
        raise IoFailure(f"{path}: need at least two frames, found {len(files)}")
    return [formats.read_frame(p) for p in files]


def _load_flows(path: Path) -> tuple[list[FlowField], list[int]]:
    files = _list(path, "flow_", (".flo",))
    if not files:
        raise IoFailure(f"{path}: no .flo files")
    return [formats.read_flow(p) for p in files], [_frame_index(p, k) for k, p in enumerate(files)]


# -- writers -----------------------------------------------------------------


def _write_invariants(out: Path, outputs: list[FrameOutput], cfg: PipelineConfig) -> None:
    vr = cfg.invariant.vmax_ratio
    vd = cfg.invariant.vmax_deviation
    for o in outputs:
        k = o.index
        formats.write_scalar(out / f"ratio_{k:06d}", o.ratio.value, o.ratio.valid, "ratio", vr)
        formats.write_scalar(out / f"residual_{k:06d}", o.residual.value, o.residual.valid, "residual", vr)
        formats.write_scalar(out / f"deviation_{k:06d}", o.deviation.value, o.deviation.valid, "deviation", vd)
        formats.write_rgb(out / f"ratio_{k:06d}.png", render_invariant(o.ratio, vr))
        formats.write_rgb(out / f"residual_{k:06d}.png", render_invariant(o.residual, vr))
        formats.write_rgb(out / f"deviation_{k:06d}.png", render_invariant(o.deviation, vd))


def _write_detections(out: Path, outputs: list[FrameOutput], cfg: PipelineConfig, source: str) -> dict:
    lines = []
    for o in outputs:
        formats.write_mask(out / f"mask_{o.index:06d}.png", o.detection.mask)
        rec = o.detection.to_json_dict()
        rec["foe"] = list(o.lookup.foe.position)
        lines.append(json.dumps(rec, sort_keys=True))
    try:
        (out / "components.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    manifest = {
        "input": source,
        "foe_mode": cfg.foe.mode,
        "frames": [
            {
                "frame_index": o.index,
                "mask": f"mask_{o.index:06d}.png",
                "foe": o.lookup.foe.to_dict(),
                "foe_estimate": o.foe_estimate.to_dict() if o.foe_estimate else None,
                "component_count": len(o.detection.components),
            }
            for o in outputs
        ],
    }
    _dump_json(out / "detect_manifest.json", manifest)
    _echo_config(out, cfg)
    return manifest


def _write_eval(out: Path, report) -> None:
    _dump_json(out / "report.json", report.to_dict())
    try:
        (out / "metrics.csv").write_text(report.to_csv())
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if report.frames_evaluated:
        plotting.plot_metrics(out / "metrics.png", report)


# -- subcommands ---------------------------------------------------------------


def cmd_synth(args, cfg: PipelineConfig) -> None:
    if cfg.scene is None:
        raise InvalidConfig("scene", "synth needs a scene description")
    out = _mkdir(Path(args.out))
    manifest = export_sequence(build_scene(cfg.scene), out)
    _echo_config(out, cfg)
    log.info("wrote %d frames to %s", len(manifest["frames"]), out)


def cmd_flow(args, cfg: PipelineConfig) -> None:
    frames = _load_frames(Path(args.frames))
    out = _mkdir(Path(args.out))
    for k, flow in enumerate(estimate_flows(frames, cfg)):
        formats.write_flow(out / f"flow_{k:06d}.flo", flow)
    _echo_config(out, cfg)


def cmd_lookup(args, cfg: PipelineConfig) -> None:
    out = _mkdir(Path(args.out))
    flow = formats.read_flow(args.flow) if args.flow else None
    cam = cfg.require_camera() if flow is None else camera_for(cfg, flow.shape)
    lookup, est = lookup_for(cfg, cam, flow)
    formats.write_lookup(out / "lookup", lookup)
    ratio_rgb = render_invariant(_lookup_ratio(lookup), cfg.invariant.vmax_ratio)
    formats.write_rgb(out / "lookup_ratio.png", ratio_rgb)
    corner = quadrant_corner(lookup.ratio, lookup.ratio_valid)
    plotting.plot_lookup(out / "lookup_figure.png", ratio_rgb, lookup.foe.position, corner)
    if est is not None:
        _dump_json(out / "foe_estimate.json", est.to_dict())
    _echo_config(out, cfg)


def _lookup_ratio(lookup):
    from .invariant import RatioImage

    return RatioImage(np.where(lookup.ratio_valid, lookup.ratio, 0.0), lookup.ratio_valid)


def cmd_invariant(args, cfg: PipelineConfig) -> None:
    flows, indices = _load_flows(Path(args.flow))
    if args.lookup:
        lookup = formats.read_lookup(args.lookup)
        cfg = _pin_foe(cfg, lookup.foe, lookup.camera, lookup.exclusion_radius_px)
    out = _mkdir(Path(args.out))
    outputs = process_flows(flows, cfg)
    for o, k in zip(outputs, indices):
        o.index = k
    _write_invariants(out, outputs, cfg)
    _echo_config(out, cfg)


def _pin_foe(cfg: PipelineConfig, foe: FoePoint, cam, radius: float) -> PipelineConfig:
    """Config whose FOE mode reproduces a stored lookup."""
    from .config import FoeMode

    f = cam.focal_length_px
    t = np.array([(foe.x - cam.principal_point[0]) / f, (foe.y - cam.principal_point[1]) / f, 1.0])
    return PipelineConfig(
        cam, cfg.flow, cfg.detection, FoeMode("from-translation", tuple(t / np.linalg.norm(t))),
        cfg.invariant, radius, cfg.flow_source, cfg.scene, cfg.workers,
    )


def _detect_inputs(args, cfg: PipelineConfig) -> tuple[list[FlowField], list[int], list[Frame] | None, str]:
    if args.flow:
        flows, indices = _load_flows(Path(args.flow))
        return flows, indices, None, str(args.flow)
    if args.frames:
        frames = _load_frames(Path(args.frames))
        flows = estimate_flows(frames, cfg)
        return flows, list(range(len(flows))), frames, str(args.frames)
    raise InvalidConfig("input", "give --flow or --frames")


def _run_detect(out: Path, flows, indices, cfg, source: str) -> list[FrameOutput]:
    outputs = process_flows(flows, cfg)
    for o, k in zip(outputs, indices):
        o.index = k
        o.detection.frame_index = k
    _write_detections(out, outputs, cfg, source)
    return outputs


def cmd_detect(args, cfg: PipelineConfig) -> None:
    flows, indices, _, source = _detect_inputs(args, cfg)
    out = _mkdir(Path(args.out))
    outputs = _run_detect(out, flows, indices, cfg, source)
    if cfg.foe.mode == "estimate":
        plotting.plot_foe_track(out / "foe_track.png", [o.lookup.foe.position for o in outputs], None)


def _masks_by_index(path: Path) -> dict[int, np.ndarray]:
    files = _list(path, "mask_", (".png", ".pgm"))
    return {_frame_index(p, k): formats.read_mask(p) for k, p in enumerate(files)}


def _evaluate(pred_dir: Path, gt_dir: Path, ignore_for=None):
    pred = _masks_by_index(pred_dir)
    gt = _masks_by_index(gt_dir)
    common = sorted(set(pred) & set(gt))
    if not common:
        raise IoFailure(f"no frame indices shared by {pred_dir} and {gt_dir}")
    ignore = [ignore_for(k) for k in common] if ignore_for else None
    report = eval_masks([pred[k] for k in common], [gt[k] for k in common], ignore)
    report.metadata["frame_indices"] = common
    return report


def cmd_eval(args, cfg: PipelineConfig) -> None:
    out = _mkdir(Path(args.out))
    ignore_for = None
    if cfg.camera is not None and cfg.foe.mode != "estimate":
        lookup, _ = lookup_for(cfg, cfg.camera)
        ex = exclusion_mask(lookup)
        ignore_for = lambda k: ex  # noqa: E731
    report = _evaluate(Path(args.pred), Path(args.gt), ignore_for)
    _write_eval(out, report)
    _echo_config(out, cfg)
    print(json.dumps(report.to_dict()["mean"], sort_keys=True))


def cmd_run(args, cfg: PipelineConfig) -> None:
    out = _mkdir(Path(args.out))
    _echo_config(out, cfg)
    gt_dir = Path(args.gt) if args.gt else None
    if args.frames:
        frames_dir = Path(args.frames)
        frames = _load_frames(frames_dir)
        flows = estimate_flows(frames, cfg)
        source = str(frames_dir)
    elif cfg.scene is not None:
        dataset = _mkdir(out / "dataset")
        export_sequence(build_scene(cfg.scene), dataset)
        _echo_config(dataset, cfg)
        frames = [formats.read_frame(dataset / f"frame_{k:06d}.png") for k in range(cfg.scene.frame_count)]
        if cfg.flow_source == "ground-truth":
            flows = [formats.read_flow(dataset / f"flow_{k:06d}.flo") for k in range(cfg.scene.frame_count - 1)]
        else:
            flows = estimate_flows(frames, cfg)
        gt_dir = dataset
        source = "scene"
    else:
        raise InvalidConfig("scene", "run needs --frames or a config with a scene")

    flow_dir = _mkdir(out / "flow")
    for k, f in enumerate(flows):
        formats.write_flow(flow_dir / f"flow_{k:06d}.flo", f)
    _echo_config(flow_dir, cfg)

    det_dir = _mkdir(out / "detect")
    outputs = _run_detect(det_dir, flows, list(range(len(flows))), cfg, source)
    inv_dir = _mkdir(out / "invariant")
    _write_invariants(inv_dir, outputs, cfg)
    _echo_config(inv_dir, cfg)
    formats.write_lookup(out / "lookup", outputs[0].lookup)

    gt_masks = None
    if gt_dir is not None:
        eval_dir = _mkdir(out / "eval")
        excl = {o.index: exclusion_mask(o.lookup) for o in outputs}
        report = _evaluate(det_dir, gt_dir, lambda k: excl[k])
        _write_eval(eval_dir, report)
        _echo_config(eval_dir, cfg)
        gt_masks = _masks_by_index(gt_dir)
        print(json.dumps(report.to_dict()["mean"], sort_keys=True))

    fig_dir = _mkdir(out / "figures")
    channel = cfg.invariant.channel
    for o, frame in zip(outputs, frames):
        img = o.deviation if channel == "deviation" else o.residual
        vmax = cfg.invariant.vmax_deviation if channel == "deviation" else cfg.invariant.vmax_ratio
        gt = gt_masks.get(o.index) if gt_masks else None
        plotting.plot_frame_panel(
            fig_dir / f"panel_{o.index:06d}.png", frame.pixels, render_invariant(img, vmax),
            o.detection.mask, gt, title=f"frame {o.index}: {len(o.detection.components)} component(s)",
        )
    if cfg.foe.mode == "estimate":
        ref = None
        if cfg.scene is not None:
            from .camera import foe_from_translation

            ref = foe_from_translation(cfg.scene.camera, cfg.scene.t_dir).position
        plotting.plot_foe_track(fig_dir / "foe_track.png", [o.lookup.foe.position for o in outputs], ref)
    _echo_config(fig_dir, cfg)


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowinvariant",
        description="Moving-object detection from a translating camera via a range-independent flow invariant.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_: str, seed: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="pipeline or scene configuration (JSON)")
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override scene / FOE-estimator seed")
        return p

    add("synth", "render a synthetic scene with ground truth")
    p = add("flow", "estimate flow between consecutive frames", seed=False)
    p.add_argument("--frames", required=True)
    p = add("lookup", "synthesize the lookup image")
    p.add_argument("--flow", help="flow file (needed for foe mode 'estimate')")
    p = add("invariant", "ratio / residual / deviation images from flow")
    p.add_argument("--flow", required=True, help="flow file or directory")
    p.add_argument("--lookup", help="stored lookup stem (overrides the config FOE)")
    p = add("detect", "moving-object masks from flow or frames")
    p.add_argument("--flow")
    p.add_argument("--frames")
    p = add("eval", "score predicted masks against ground truth", seed=False)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p = add("run", "full pipeline on frames or on a synthesized scene")
    p.add_argument("--frames")
    p.add_argument("--gt", help="ground-truth masks for --frames input")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "flow": cmd_flow,
    "lookup": cmd_lookup,
    "invariant": cmd_invariant,
    "detect": cmd_detect,
    "eval": cmd_eval,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_seed(getattr(args, "seed", None))
        COMMANDS[args.command](args, cfg)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FlowInvariantError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
