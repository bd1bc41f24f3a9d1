import json
import math
import subprocess
import sys

import numpy as np
import pytest

from flowinvariant import CameraModel, read_mask
from flowinvariant.cli import main

from conftest import scene_config, side_mover


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def small_cam():
    return CameraModel.centered(80.0, 96, 72)


def test_unknown_subcommand(capsys):
    assert main(["bogus", "--out", "x"]) == 2
    assert "usage" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "flowinvariant", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout


def test_config_error_names_field(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"detection": {"deviation_threshold": 2.0}})
    assert main(["lookup", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "detection.deviation_threshold" in capsys.readouterr().err


def test_missing_input_is_runtime_error(tmp_path, capsys):
    assert main(["detect", "--flow", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
    assert "IoFailure" in capsys.readouterr().err


def test_stationary_run_is_empty(tmp_path, small_cam, capsys):
    cfg = _write(tmp_path / "scene.json", scene_config(small_cam, frames=3, v0=1.0).to_dict())
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    for k in range(2):
        assert not read_mask(out / "detect" / f"mask_{k:06d}.png").any()
    report = json.loads((out / "eval" / "report.json").read_text())
    assert report["mean"]["precision"] == 1.0 and report["mean"]["recall"] == 1.0
    # config echo in every output directory
    for d in [out, *[p for p in out.iterdir() if p.is_dir()]]:
        assert (d / "resolved_config.json").exists(), d
    for name in ("metrics.png",):
        assert (out / "eval" / name).exists()
    assert (out / "figures" / "panel_000000.png").exists()
    capsys.readouterr()


def test_step_by_step_pipeline(tmp_path, small_cam, capsys):
    scene = scene_config(small_cam, [side_mover(z=7.0, x=1.6, size=0.5)], frames=3, seed=2, range_min=10.0)
    cfg = _write(tmp_path / "scene.json", {"scene": scene.to_dict(), "flow_source": "ground-truth"})
    data, det, ev = tmp_path / "data", tmp_path / "det", tmp_path / "ev"
    assert main(["synth", "--config", cfg, "--out", str(data)]) == 0
    assert main(["detect", "--config", cfg, "--flow", str(data), "--out", str(det)]) == 0
    lines = (det / "components.jsonl").read_text().splitlines()
    assert len(lines) == 2 and all(len(json.loads(l)["components"]) == 1 for l in lines)
    assert main(["eval", "--config", cfg, "--pred", str(det), "--gt", str(data), "--out", str(ev)]) == 0
    report = json.loads((ev / "report.json").read_text())
    assert report["frames_evaluated"] == 2 and report["mean"]["recall"] > 0.9
    assert main(["flow", "--frames", str(data), "--out", str(tmp_path / "flow")]) == 0
    assert len(list((tmp_path / "flow").glob("flow_*.flo"))) == 2
    assert main(["lookup", "--config", cfg, "--out", str(tmp_path / "lk")]) == 0
    assert main(["invariant", "--flow", str(data), "--lookup", str(tmp_path / "lk" / "lookup"),
                 "--out", str(tmp_path / "inv")]) == 0
    assert (tmp_path / "inv" / "deviation_000001.png").exists()
    out = tmp_path / "run"
    assert main(["run", "--frames", str(data), "--gt", str(data), "--out", str(out)]) == 0
    assert json.loads((out / "eval" / "report.json").read_text())["frames_evaluated"] == 2
    capsys.readouterr()


def test_detect_estimates_slanted_foe(tmp_path, small_cam):
    a = math.radians(10)
    scene = scene_config(small_cam, frames=3, t_dir=(math.sin(a), 0.0, math.cos(a)), seed=4)
    cfg_scene = _write(tmp_path / "scene.json", scene.to_dict())
    data = tmp_path / "data"
    assert main(["synth", "--config", cfg_scene, "--out", str(data)]) == 0
    cfg = _write(tmp_path / "c.json", {"foe": {"mode": "estimate"}})
    assert main(["detect", "--config", cfg, "--flow", str(data), "--out", str(tmp_path / "det")]) == 0
    truth = json.loads((data / "manifest.json").read_text())["foe"]["position"]
    manifest = json.loads((tmp_path / "det" / "detect_manifest.json").read_text())
    for fr in manifest["frames"]:
        assert np.hypot(fr["foe"]["position"][0] - truth[0], fr["foe"]["position"][1] - truth[1]) <= 2.0
