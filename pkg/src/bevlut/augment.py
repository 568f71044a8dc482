"""Calibration-consistent augmentation math.

Image-space transforms (flip / rotate / scale / crop) are composed into one
homogeneous pixel matrix A and folded into the intrinsics, K' = A @ K, so a
3D point that projected to pixel p now projects to A @ p. BEV-space
transforms (flip / rotate / scale of the ego frame) become a 4x4 matrix B
folded into every camera's extrinsics, E' = E @ B^-1, and applied to the 3D
boxes so labels stay consistent with the warped geometry. Both reuse the
ordinary projection path, so an augmented sample exercises the same LUT
machinery as a clean one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError
from .geometry import CameraCalibration, Extrinsics, Intrinsics, rot_z


@dataclass(frozen=True)
class ImageAug:
    """Pixel-space augmentation, applied flip -> rotate -> scale -> crop."""

    flip_horizontal: bool = False
    rotation: float = 0.0  # radians, about the image center
    scale: float = 1.0
    crop_offset: tuple[float, float] = (0.0, 0.0)  # (du, dv), new window origin

    def __post_init__(self):
        if self.scale <= 0:
            raise CalibrationError(f"scale must be positive, got {self.scale}")

    def matrix(self, width: int, height: int) -> np.ndarray:
        """The composed 3x3 pixel transform A for an image of given size."""
        a = np.eye(3)
        if self.flip_horizontal:
            a = np.array([[-1.0, 0.0, width - 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        if self.rotation != 0.0:
            cu, cv = width / 2.0, height / 2.0
            c, s = math.cos(self.rotation), math.sin(self.rotation)
            rot = np.array(
                [
                    [c, -s, cu - c * cu + s * cv],
                    [s, c, cv - s * cu - c * cv],
                    [0.0, 0.0, 1.0],
                ]
            )
            a = rot @ a
        if self.scale != 1.0:
            a = np.diag((self.scale, self.scale, 1.0)) @ a
        du, dv = self.crop_offset
        if du or dv:
            a = np.array([[1.0, 0.0, -du], [0.0, 1.0, -dv], [0.0, 0.0, 1.0]]) @ a
        return a

    def output_dims(self, width: int, height: int) -> tuple[int, int]:
        return max(1, round(width * self.scale)), max(1, round(height * self.scale))


@dataclass(frozen=True)
class BevAug:
    """Ego-frame augmentation, applied flip -> rotate -> scale."""

    flip_x: bool = False
    flip_y: bool = False
    rotation: float = 0.0  # radians, about ego z
    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise CalibrationError(f"scale must be positive, got {self.scale}")

    def matrix(self) -> np.ndarray:
        """The composed 4x4 ego-frame transform B (a uniform similarity)."""
        b = np.eye(4)
        b[0, 0] = -1.0 if self.flip_x else 1.0
        b[1, 1] = -1.0 if self.flip_y else 1.0
        m = np.eye(4)
        m[:3, :3] = self.scale * rot_z(self.rotation)
        return m @ b


@dataclass(frozen=True)
class Box3D:
    center: tuple[float, float, float]
    size: tuple[float, float, float]  # (l, w, h)
    yaw: float = 0.0
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise CalibrationError(f"box sizes must be positive, got {self.size}")


def apply_image_aug(aug: ImageAug, calib: CameraCalibration) -> CameraCalibration:
    """Rewrite a camera's intrinsics and image dims for a pixel transform.

    Extrinsics are untouched: the 3D geometry is unchanged, only where it
    lands on the image moves. Emits a RuntimeWarning when the transformed
    principal point leaves the new image (legal, but usually a sign of an
    aggressive crop).
    """
    a = aug.matrix(calib.image_width, calib.image_height)
    k_new = a @ calib.intrinsics.k
    new_w, new_h = aug.output_dims(calib.image_width, calib.image_height)
    pp = a @ np.array([calib.intrinsics.cx, calib.intrinsics.cy, 1.0])
    if not (0 <= pp[0] < new_w and 0 <= pp[1] < new_h):
        warnings.warn(
            f"camera {calib.camera_id}: principal point ({pp[0]:.1f}, {pp[1]:.1f}) "
            f"outside augmented image {new_w}x{new_h}",
            RuntimeWarning,
            stacklevel=2,
        )
    return replace(
        calib, intrinsics=Intrinsics(k_new), image_width=new_w, image_height=new_h
    )


def _transform_box(b: np.ndarray, box: Box3D, scale: float) -> Box3D:
    center = b @ np.array([*box.center, 1.0])
    planar = b[:2, :2]
    heading = planar @ np.array([math.cos(box.yaw), math.sin(box.yaw)])
    vel = planar @ np.asarray(box.velocity, dtype=np.float64)
    return Box3D(
        center=tuple(center[:3]),
        size=tuple(s * scale for s in box.size),
        yaw=math.atan2(heading[1], heading[0]),
        velocity=tuple(vel),
    )


def apply_bev_aug(
    aug: BevAug, rig: list[CameraCalibration], boxes: list[Box3D]
) -> tuple[list[CameraCalibration], list[Box3D]]:
    """Rewrite extrinsics and 3D boxes for an ego-frame transform B.

    Each camera gets E' = E @ B^-1, so projecting B @ p through the new rig
    reproduces projecting p through the old one; boxes are carried through
    B directly (center, heading, velocity, sizes scaled by aug.scale).
    """
    b = aug.matrix()
    b_inv = np.linalg.inv(b)
    new_rig = [
        replace(cam, extrinsics=Extrinsics.similarity(cam.extrinsics.matrix @ b_inv))
        for cam in rig
    ]
    new_boxes = [_transform_box(b, box, aug.scale) for box in boxes]
    return new_rig, new_boxes


@dataclass(frozen=True)
class AugmentRanges:
    """Sampling ranges; defaults are config, not ground truth."""

    image_rotation_max: float = math.radians(5.0)
    image_scale_range: tuple[float, float] = (0.9, 1.1)
    image_flip_prob: float = 0.5
    bev_rotation_max: float = math.radians(22.5)
    bev_scale_range: tuple[float, float] = (0.95, 1.05)
    bev_flip_prob: float = 0.5


def sample_image_aug(rng: np.random.Generator, ranges: AugmentRanges = AugmentRanges()) -> ImageAug:
    return ImageAug(
        flip_horizontal=bool(rng.random() < ranges.image_flip_prob),
        rotation=float(rng.uniform(-ranges.image_rotation_max, ranges.image_rotation_max)),
        scale=float(rng.uniform(*ranges.image_scale_range)),
    )


def sample_bev_aug(rng: np.random.Generator, ranges: AugmentRanges = AugmentRanges()) -> BevAug:
    return BevAug(
        flip_x=bool(rng.random() < ranges.bev_flip_prob),
        flip_y=bool(rng.random() < ranges.bev_flip_prob),
        rotation=float(rng.uniform(-ranges.bev_rotation_max, ranges.bev_rotation_max)),
        scale=float(rng.uniform(*ranges.bev_scale_range)),
    )
