import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowinvariant import CameraModel, FlowField, MoverSpec, SceneConfig, SpeedProfile

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def cam():
    return CameraModel.centered(100.0, 160, 120)


def radial_flow(cam, foe, scale=0.05, valid=None):
    """Pure expansion about ``foe``: every vector points away from it."""
    xs, ys = cam.pixel_grid()
    u = (xs - foe[0]) * scale
    v = (ys - foe[1]) * scale
    return FlowField(u, v, np.ones(cam.shape, bool) if valid is None else valid)


def scene_config(cam, movers=(), seed=0, frames=4, v0=1.0, **kw):
    return SceneConfig(
        camera=cam,
        speed_profile=SpeedProfile("constant", v0, 0.0),
        frame_count=frames,
        movers=tuple(movers),
        seed=seed,
        **kw,
    )


def side_mover(z=8.0, x=2.0, vy=-6.0, size=0.4):
    """A box on the image side moving vertically, i.e. across the radial direction."""
    return MoverSpec((x, 0.0, z), (size, size, size), (0.0, vy, 0.0))


# Acceptance verdicts, one line per criterion, echoed at the end of the run.
ACCEPTANCE: list[str] = []


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
    print(ACCEPTANCE[-1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
