import json

import pytest

from flowinvariant import CameraModel, InvalidConfig, PipelineConfig, load_config
from flowinvariant.config import FoeMode

from conftest import scene_config


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.foe.mode == "principal-point"
    assert cfg.detection.deviation_threshold == 0.2
    assert cfg.exclusion_radius_px == 8.0


def test_round_trip(tmp_path):
    cam = CameraModel.centered(100.0, 64, 48)
    cfg = PipelineConfig(camera=cam, foe=FoeMode("from-translation", (0.1, 0.0, 1.0)), scene=scene_config(cam))
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg


def test_bare_scene_is_wrapped(tmp_path):
    cam = CameraModel.centered(100.0, 64, 48)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scene_config(cam).to_dict()))
    cfg = load_config(path)
    assert cfg.scene is not None and cfg.camera == cam


@pytest.mark.parametrize(
    "raw,field",
    [
        ({"detecton": {}}, "detecton"),
        ({"flow": {"levels": 3}}, "flow.levels"),
        ({"foe": {"mode": "guess"}}, "foe.mode"),
        ({"foe": {"mode": "principal-point", "t_dir": [0, 0, 1]}}, "foe.t_dir"),
        ({"foe": {"mode": "from-translation"}}, "foe.t_dir"),
        ({"invariant": {"channel": "both"}}, "invariant.channel"),
        ({"exclusion_radius_px": "big"}, "exclusion_radius_px"),
        ({"workers": 0}, "workers"),
        ({"detection": {"min_area_px": -3}}, "detection.min_area_px"),
    ],
)
def test_invalid_fields_named(tmp_path, raw, field):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(InvalidConfig) as err:
        load_config(path)
    assert err.value.field == field


def test_seed_override():
    cam = CameraModel.centered(100.0, 64, 48)
    cfg = PipelineConfig(scene=scene_config(cam, seed=1), foe=FoeMode("estimate")).with_seed(9)
    assert cfg.scene.seed == 9 and cfg.foe.seed == 9
