import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bevlut import CameraCalibration, Extrinsics, Intrinsics, VoxelGridSpec, make_nuscenes_like_rig

settings.register_profile(
    "ci",
    deadline=None,  # noisy shared VM; wall-clock deadlines just flake
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def six_cam_rig():
    return make_nuscenes_like_rig()


@pytest.fixture(scope="session")
def bench_grid():
    return VoxelGridSpec((-49.75, -49.75, -4.0), (0.5, 0.5, 2.0), (200, 200, 4))


@pytest.fixture
def small_grid():
    return VoxelGridSpec((-7.5, -7.5, -1.0), (1.0, 1.0, 1.0), (16, 16, 3))


def make_camera(
    cam_id=0,
    yaw=0.0,
    pitch=0.0,
    position=(0.0, 0.0, 1.5),
    focal=100.0,
    width=128,
    height=96,
    name="",
):
    """A pinhole camera looking along ego yaw/pitch; used all over the tests."""
    cam_z = np.array(
        [math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), -math.sin(pitch)]
    )
    cam_x = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    cam_y = np.cross(cam_z, cam_x)
    r_ego_from_cam = np.column_stack([cam_x, cam_y, cam_z])
    m = np.eye(4)
    m[:3, :3] = r_ego_from_cam.T
    m[:3, 3] = -r_ego_from_cam.T @ np.asarray(position, dtype=np.float64)
    return CameraCalibration(
        camera_id=cam_id,
        intrinsics=Intrinsics.pinhole(focal, focal, width / 2.0, height / 2.0),
        extrinsics=Extrinsics(m),
        image_width=width,
        image_height=height,
        name=name,
    )


def random_rigid(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    r = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = rng.uniform(-10.0, 10.0, size=3)
    return m


def random_rig(rng: np.random.Generator, num_cameras: int, width=64, height=48):
    """Cameras fanned around the ego with mild pose jitter."""
    rig = []
    for cid in range(num_cameras):
        rig.append(
            make_camera(
                cam_id=cid,
                yaw=2 * math.pi * cid / num_cameras + rng.uniform(-0.2, 0.2),
                pitch=rng.uniform(0.0, 0.6),
                position=(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.0, 2.0)),
                focal=rng.uniform(30.0, 120.0),
                width=width,
                height=height,
            )
        )
    return rig
