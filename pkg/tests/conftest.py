import numpy as np
import pytest

from cosmolod.builder import build
from cosmolod.dataset import Dataset
from cosmolod.engine import Camera
from cosmolod.geometry import BuildConfig
from cosmolod.ingest import SynthConfig, gen_synthetic, snapshot_paths, write_dataset

# The "standard scene" used by rendering and equivalence tests: 1e5 points,
# 8 drifting clusters, 2 snapshots, fixed seed.
STD_CFG = SynthConfig(
    n_points=100_000,
    n_clusters=8,
    n_snapshots=2,
    plummer_scale=1.0,
    box_size=100.0,
    drift_speed=1.0,
    seed=7,
)
STD_BUILD = BuildConfig(node_capacity=16000, density_exponent=1.0, seed=7)

# A smaller, deeper tree for cut-selection unit tests.
SMALL_CFG = SynthConfig(
    n_points=20_000,
    n_clusters=4,
    n_snapshots=3,
    plummer_scale=1.0,
    box_size=50.0,
    drift_speed=0.5,
    seed=11,
)
SMALL_BUILD = BuildConfig(node_capacity=1000, density_exponent=1.0, seed=11)


@pytest.fixture(scope="session")
def std_tables():
    return gen_synthetic(STD_CFG)


@pytest.fixture(scope="session")
def std_dataset_dir(std_tables, tmp_path_factory):
    root = tmp_path_factory.mktemp("std")
    write_dataset(std_tables, root / "raw")
    build(snapshot_paths(root / "raw"), STD_BUILD, root / "lod")
    return root / "lod"


@pytest.fixture(scope="session")
def std_dataset(std_dataset_dir):
    with Dataset(std_dataset_dir) as ds:
        yield ds


@pytest.fixture(scope="session")
def small_tables():
    return gen_synthetic(SMALL_CFG)


@pytest.fixture(scope="session")
def small_dataset_dir(small_tables, tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    write_dataset(small_tables, root / "raw")
    build(snapshot_paths(root / "raw"), SMALL_BUILD, root / "lod")
    return root / "lod"


@pytest.fixture(scope="session")
def small_dataset(small_dataset_dir):
    with Dataset(small_dataset_dir) as ds:
        yield ds


def std_camera(width=512, height=512):
    """Frames the cluster region of the standard scene."""
    return Camera(
        position=np.array([50.0, 50.0, -180.0]),
        look_at=np.array([50.0, 50.0, 50.0]),
        up=np.array([0.0, 1.0, 0.0]),
        fov_y=60.0,
        width=width,
        height=height,
        near=0.01,
    )


def whole_box_camera(box, width=256, height=256):
    """Positioned so the entire box fits inside the frustum."""
    center = box.center
    # distance that fits the box diagonal within the narrower half-angle
    import math

    half = math.radians(60.0) / 2.0
    dist = box.diagonal() / math.tan(half) + box.diagonal()
    return Camera(
        position=center - np.array([0.0, 0.0, dist]),
        look_at=center,
        up=np.array([0.0, 1.0, 0.0]),
        fov_y=60.0,
        width=width,
        height=height,
        near=0.01,
    )


def random_cameras(box, count, seed, width=640, height=480):
    rng = np.random.default_rng(seed)
    center, diag = box.center, box.diagonal()
    cams = []
    while len(cams) < count:
        pos = center + rng.uniform(-1.5, 1.5, 3) * diag
        target = box.min + rng.uniform(0.0, 1.0, 3) * box.extent
        if np.allclose(pos, target):
            continue
        cams.append(
            Camera(
                position=pos,
                look_at=target,
                up=np.array([0.0, 1.0, 0.0]),
                fov_y=float(rng.uniform(30.0, 90.0)),
                width=width,
                height=height,
                near=0.01,
            )
        )
    return cams
