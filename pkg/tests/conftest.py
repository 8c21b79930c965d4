import numpy as np
import pytest

from iscat.common.grid import make_grid
from iscat.data.data_pipeline import DataPipeline, generate_split
from iscat.forward.greens import build_greens, incident_field
from iscat.forward.scene import make_scene

LAMBDA0 = 0.075


@pytest.fixture
def grid16():
    return make_grid(16, 16, LAMBDA0, LAMBDA0, LAMBDA0)


@pytest.fixture
def scene16(grid16):
    return make_scene(grid16, 8, 8, 3.0 * LAMBDA0)


@pytest.fixture
def ops16(scene16):
    return build_greens(scene16, dense=True)


@pytest.fixture
def grid8():
    return make_grid(8, 8, 0.6 * LAMBDA0, 0.6 * LAMBDA0, LAMBDA0)


@pytest.fixture
def scene8(grid8):
    return make_scene(grid8, 4, 4, 2.0 * LAMBDA0)


@pytest.fixture
def ops8(scene8):
    return build_greens(scene8, dense=True)


@pytest.fixture
def einc8(scene8):
    return incident_field(scene8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def tiny_data(tmp_path_factory):
    """Four disk samples on a 16x16 grid, SNRs 20 and 5 dB."""
    grid = make_grid(16, 16, LAMBDA0, LAMBDA0, LAMBDA0)
    scene = make_scene(grid, 4, 4, 2.0 * LAMBDA0)
    pipeline = DataPipeline(scene, "disk", (1.5, 3.0), [20.0, 5.0], master_seed=11)
    root = tmp_path_factory.mktemp("tiny_data")
    generate_split(str(root / "train"), pipeline, "train", 4)
    generate_split(str(root / "test"), pipeline, "test", 2)
    return root, scene, pipeline.ops
