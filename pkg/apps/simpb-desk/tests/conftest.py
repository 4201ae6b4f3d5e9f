import math
from pathlib import Path

import numpy as np
import pytest

from simpb_desk.domain import Anchor3D, CameraParams, RunConfig, SceneGenConfig

FIXTURES = Path(__file__).parent / "fixtures"
CONFIGS = Path(__file__).parent.parent / "configs"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def front_camera(yaw_deg: float = 0.0, image_size=(192, 96), hfov_deg: float = 60.0) -> CameraParams:
    return CameraParams.from_mounting(math.radians(yaw_deg), math.radians(hfov_deg), image_size, height=1.5)


def anchor_row(x, y, z=1.5, w=1.0, l=1.0, h=1.0, yaw=0.0, vx=0.0, vy=0.0) -> np.ndarray:
    return np.array([x, y, z, w, l, h, yaw, vx, vy], dtype=np.float64)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def camera() -> CameraParams:
    return front_camera()


@pytest.fixture
def two_camera_rig() -> list[CameraParams]:
    return [front_camera(-25.0), front_camera(25.0)]


@pytest.fixture
def tiny_run() -> RunConfig:
    """N=8, C=32, V=2 desk model on 64x32 images."""

    return RunConfig.from_file(CONFIGS / "gradcheck.toml")


@pytest.fixture
def desk_run() -> RunConfig:
    return RunConfig.from_file(CONFIGS / "desk.toml")


@pytest.fixture
def unit_anchor() -> Anchor3D:
    return Anchor3D(x=10.0, y=0.0, z=1.5, w=1.0, l=1.0, h=1.0)


@pytest.fixture
def small_scene_config() -> SceneGenConfig:
    return SceneGenConfig(
        camera_yaws_deg=[-25.0, 25.0],
        image_size=(64, 32),
        depth_range=(6.0, 20.0),
        object_count_range=(1, 3),
    )
