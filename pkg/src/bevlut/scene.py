"""Synthetic fixtures and calibration ingestion.

Camera rigs load from a minimal standalone schema (JSON): one record per
camera with ``camera_id`` (string), ``translation`` [x, y, z] in meters,
``rotation`` [w, x, y, z] unit quaternion taking camera-frame points to the
ego frame, ``camera_intrinsic`` 3x3 row-major, ``width`` and ``height``.
Integer camera ids are assigned in file order. The shipped six-camera
preset is frozen data, not regenerated, so occupancy measurements on it are
stable across releases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from os import PathLike

import numpy as np

from .errors import CalibrationParseError, RigConfigError, UnknownPresetError
from .geometry import (
    CameraCalibration,
    EgoPose,
    Extrinsics,
    Intrinsics,
    invert_rigid,
    project_point,
    rigid_from_rt,
)
from .lut import rig_feature_dims
from .projection import FeatureMapSet

PRESETS = ("six_cam_default",)
_REQUIRED_FIELDS = ("camera_id", "translation", "rotation", "camera_intrinsic", "width", "height")


def quaternion_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion given as [w, x, y, z]."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quaternion(r: np.ndarray) -> tuple[float, float, float, float]:
    """Unit quaternion [w, x, y, z] of a rotation matrix, w >= 0."""
    r = np.asarray(r, dtype=np.float64)
    t = np.trace(r)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(r)))
        if i == 0:
            s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
            w = (r[2, 1] - r[1, 2]) / s
            x = 0.25 * s
            y = (r[0, 1] + r[1, 0]) / s
            z = (r[0, 2] + r[2, 0]) / s
        elif i == 1:
            s = math.sqrt(1.0 - r[0, 0] + r[1, 1] - r[2, 2]) * 2
            w = (r[0, 2] - r[2, 0]) / s
            x = (r[0, 1] + r[1, 0]) / s
            y = 0.25 * s
            z = (r[1, 2] + r[2, 1]) / s
        else:
            s = math.sqrt(1.0 - r[0, 0] - r[1, 1] + r[2, 2]) * 2
            w = (r[1, 0] - r[0, 1]) / s
            x = (r[0, 2] + r[2, 0]) / s
            y = (r[1, 2] + r[2, 1]) / s
            z = 0.25 * s
    if w < 0:
        w, x, y, z = -w, -x, -y, -z
    return w, x, y, z


def parse_calibration_records(records: list[dict]) -> list[CameraCalibration]:
    rig = []
    for idx, rec in enumerate(records):
        for f in _REQUIRED_FIELDS:
            if f not in rec:
                raise CalibrationParseError(f"record {idx}: missing field '{f}'")
        q = np.asarray(rec["rotation"], dtype=np.float64)
        if q.shape != (4,):
            raise CalibrationParseError(f"record {idx}: rotation must be [w, x, y, z]")
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > 1e-3:
            raise CalibrationParseError(
                f"record {idx} ({rec['camera_id']}): non-unit quaternion (norm {norm:.6f})"
            )
        k = np.asarray(rec["camera_intrinsic"], dtype=np.float64)
        if k.shape != (3, 3):
            raise CalibrationParseError(f"record {idx}: camera_intrinsic must be 3x3")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise CalibrationParseError(
                f"record {idx} ({rec['camera_id']}): non-positive focal length"
            )
        t = np.asarray(rec["translation"], dtype=np.float64)
        if t.shape != (3,):
            raise CalibrationParseError(f"record {idx}: translation must be [x, y, z]")
        ego_from_cam = rigid_from_rt(quaternion_to_rotation(q / norm), t)
        rig.append(
            CameraCalibration(
                camera_id=idx,
                intrinsics=Intrinsics(k),
                extrinsics=Extrinsics(invert_rigid(ego_from_cam)),
                image_width=int(rec["width"]),
                image_height=int(rec["height"]),
                name=str(rec["camera_id"]),
            )
        )
    return rig


def load_nuscenes_calibration(path: str | PathLike) -> list[CameraCalibration]:
    with open(path) as f:
        doc = json.load(f)
    records = doc["cameras"] if isinstance(doc, dict) else doc
    if not isinstance(records, list):
        raise CalibrationParseError("calibration file must hold a list of camera records")
    return parse_calibration_records(records)


def calibration_to_records(rig: list[CameraCalibration]) -> list[dict]:
    """Inverse of the loader, for round-trips and fixture freezing."""
    records = []
    for cam in rig:
        ego_from_cam = invert_rigid(cam.extrinsics.matrix)
        records.append(
            {
                "camera_id": cam.name or str(cam.camera_id),
                "translation": ego_from_cam[:3, 3].tolist(),
                "rotation": list(rotation_to_quaternion(ego_from_cam[:3, :3])),
                "camera_intrinsic": cam.intrinsics.k.tolist(),
                "width": cam.image_width,
                "height": cam.image_height,
            }
        )
    return records


def save_nuscenes_calibration(path: str | PathLike, rig: list[CameraCalibration]) -> None:
    with open(path, "w") as f:
        json.dump({"cameras": calibration_to_records(rig)}, f, indent=2)
        f.write("\n")


def fixture_path(name: str):
    return resources.files("bevlut") / "fixtures" / f"{name}.json"


def make_nuscenes_like_rig(preset: str = "six_cam_default") -> list[CameraCalibration]:
    """The frozen six-camera rig: a front-facing trio plus a rear trio."""
    if preset not in PRESETS:
        raise UnknownPresetError(f"unknown rig preset '{preset}', have {PRESETS}")
    with resources.as_file(fixture_path(preset)) as p:
        return load_nuscenes_calibration(p)


@dataclass(frozen=True)
class Beacon:
    position: tuple[float, float, float]  # global frame
    signature: np.ndarray  # (C,) float32, one-hot-dominant


@dataclass(frozen=True)
class SyntheticScene:
    rig: list[CameraCalibration]
    trajectory: list[EgoPose]
    beacons: list[Beacon]


def straight_trajectory(num_frames: int, speed: float, dt: float = 0.5) -> list[EgoPose]:
    """Constant-velocity ego motion along global +x; index 0 is earliest."""
    poses = []
    for f in range(num_frames):
        m = np.eye(4)
        m[0, 3] = speed * dt * f
        poses.append(EgoPose(m, timestamp=dt * f))
    return poses


def make_scene(
    rig: list[CameraCalibration],
    trajectory: list[EgoPose],
    beacon_positions,
    channels: int,
) -> SyntheticScene:
    positions = [tuple(float(v) for v in p) for p in beacon_positions]
    if len(positions) > channels:
        raise RigConfigError(
            f"{len(positions)} beacons need distinct channels, have {channels}"
        )
    beacons = []
    for i, pos in enumerate(positions):
        sig = np.zeros(channels, dtype=np.float32)
        sig[i] = 1.0
        beacons.append(Beacon(pos, sig))
    return SyntheticScene(rig=list(rig), trajectory=list(trajectory), beacons=beacons)


def render_beacons(scene: SyntheticScene, frame: int, stride: int) -> FeatureMapSet:
    """Paint beacon signatures into per-camera feature maps for one frame.

    Each camera that sees a beacon gets the signature at the projected
    feature cell; collisions within a camera resolve first-beacon-wins in
    scene order.
    """
    if not 0 <= frame < len(scene.trajectory):
        raise IndexError(f"frame {frame} outside trajectory of {len(scene.trajectory)}")
    h_f, w_f = rig_feature_dims(scene.rig, stride)
    channels = scene.beacons[0].signature.size if scene.beacons else 1
    maps = np.zeros((len(scene.rig), h_f, w_f, channels), dtype=np.float32)
    written = np.zeros((len(scene.rig), h_f, w_f), dtype=bool)
    ego_from_global = invert_rigid(scene.trajectory[frame].matrix)
    for beacon in scene.beacons:
        p_ego = (ego_from_global @ np.array([*beacon.position, 1.0]))[:3]
        for cam in scene.rig:
            hit = project_point(cam, p_ego, stride)
            if hit is None:
                continue
            u_f, v_f, _ = hit
            if written[cam.camera_id, v_f, u_f]:
                continue
            maps[cam.camera_id, v_f, u_f] = beacon.signature
            written[cam.camera_id, v_f, u_f] = True
    return FeatureMapSet(maps)
