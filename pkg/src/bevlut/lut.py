"""Static projection look-up table: one fused feature index per voxel.

Each entry packs (camera, v_f, u_f) into a single i32,
``camera_id * H_f * W_f + v_f * W_f + u_f``, or -1 for voxels no camera
sees. One gather per voxel in the hot loop, 4 bytes per voxel at rest
(200x200x4 -> 640 KB).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    DecodeError,
    EntryRangeError,
    RigConfigError,
    TruncatedStreamError,
    UnsupportedVersionError,
)
from .geometry import (
    NEAR_CLIP_DEFAULT,
    CameraCalibration,
    VoxelGridSpec,
    project_to_feature_cells,
)

MAGIC = b"FBLT"
VERSION = 1
INVALID = -1


@dataclass(frozen=True)
class LutBuildConfig:
    feature_stride: int
    camera_priority: tuple[int, ...]
    near_clip: float = NEAR_CLIP_DEFAULT

    def __post_init__(self):
        if self.feature_stride < 1:
            raise RigConfigError(f"feature_stride must be >= 1, got {self.feature_stride}")
        object.__setattr__(self, "camera_priority", tuple(int(c) for c in self.camera_priority))


@dataclass(frozen=True, eq=False)
class ProjectionLUT:
    grid: VoxelGridSpec
    feature_dims: tuple[int, int]  # (H_f, W_f)
    num_cameras: int
    entries: np.ndarray  # i32, flat, k fastest / i slowest

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.int32)
        if entries.ndim != 1 or entries.size != self.grid.num_voxels:
            raise RigConfigError(
                f"entries length {entries.size} != voxel count {self.grid.num_voxels}"
            )
        h_f, w_f = self.feature_dims
        limit = self.num_cameras * h_f * w_f
        if entries.size and (entries.min() < INVALID or entries.max() >= limit):
            raise EntryRangeError(f"entry out of range [-1, {limit})")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "feature_dims", (int(h_f), int(w_f)))


def rig_feature_dims(rig: list[CameraCalibration], feature_stride: int) -> tuple[int, int]:
    """Shared (H_f, W_f) of a rig, validating dims and stride divisibility."""
    if not rig:
        raise RigConfigError("rig is empty")
    w, h = rig[0].image_width, rig[0].image_height
    for cam in rig[1:]:
        if (cam.image_width, cam.image_height) != (w, h):
            raise RigConfigError(
                f"mismatched image dims across cameras: {w}x{h} vs "
                f"{cam.image_width}x{cam.image_height} (camera {cam.camera_id})"
            )
    if w % feature_stride or h % feature_stride:
        raise RigConfigError(
            f"stride {feature_stride} does not divide image dims {w}x{h}"
        )
    return h // feature_stride, w // feature_stride


def _check_priority(rig: list[CameraCalibration], priority: tuple[int, ...]) -> None:
    ids = sorted(cam.camera_id for cam in rig)
    if ids != list(range(len(rig))):
        raise RigConfigError(f"camera ids must be 0..{len(rig) - 1}, got {ids}")
    if sorted(priority) != ids:
        raise RigConfigError(
            f"camera_priority {list(priority)} is not a permutation of rig ids {ids}"
        )


def build_lut(
    rig: list[CameraCalibration], grid: VoxelGridSpec, cfg: LutBuildConfig
) -> ProjectionLUT:
    """Precompute the per-voxel feature index table for a fixed rig.

    Cameras are tried in ``cfg.camera_priority`` order and the first camera
    that sees a voxel center claims it (first-write-wins); voxels nobody
    sees stay -1. Pure function of the calibration, so identical inputs
    give bit-identical tables.
    """
    h_f, w_f = rig_feature_dims(rig, cfg.feature_stride)
    _check_priority(rig, cfg.camera_priority)
    by_id = {cam.camera_id: cam for cam in rig}

    centers = grid.centers()
    entries = np.full(grid.num_voxels, INVALID, dtype=np.int32)
    claimed = np.zeros(grid.num_voxels, dtype=bool)
    page = h_f * w_f
    for cam_id in cfg.camera_priority:
        valid, u_f, v_f, _ = project_to_feature_cells(
            by_id[cam_id], centers, cfg.feature_stride, cfg.near_clip
        )
        take = valid & ~claimed
        entries[take] = (cam_id * page + v_f[take] * w_f + u_f[take]).astype(np.int32)
        claimed |= take
    return ProjectionLUT(grid, (h_f, w_f), len(rig), entries)


@dataclass(frozen=True)
class OccupancyReport:
    total_voxels: int
    valid_count: int
    per_camera_counts: tuple[int, ...]
    valid_fraction: float

    @property
    def per_camera_fractions(self) -> tuple[float, ...]:
        return tuple(c / self.total_voxels for c in self.per_camera_counts)


def lut_stats(lut: ProjectionLUT) -> OccupancyReport:
    h_f, w_f = lut.feature_dims
    valid_entries = lut.entries[lut.entries >= 0]
    counts = np.bincount(valid_entries // (h_f * w_f), minlength=lut.num_cameras)
    total = int(lut.entries.size)
    valid = int(valid_entries.size)
    return OccupancyReport(
        total_voxels=total,
        valid_count=valid,
        per_camera_counts=tuple(int(c) for c in counts),
        valid_fraction=valid / total if total else 0.0,
    )


def serialize_lut(lut: ProjectionLUT) -> bytes:
    nx, ny, nz = lut.grid.dims
    h_f, w_f = lut.feature_dims
    header = MAGIC + struct.pack("<7I", VERSION, nx, ny, nz, h_f, w_f, lut.num_cameras)
    return header + lut.entries.astype("<i4").tobytes()


def deserialize_lut(buf: bytes, grid: VoxelGridSpec | None = None) -> ProjectionLUT:
    """Decode a serialized table.

    The stream carries only the voxel counts, not the metric grid geometry;
    pass ``grid`` to attach real cell sizes, otherwise a unit grid with the
    decoded dims is used.
    """
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("bad magic: not a LUT stream")
    if len(buf) < 32:
        raise TruncatedStreamError("truncated stream: header incomplete")
    version, nx, ny, nz, h_f, w_f, num_cameras = struct.unpack_from("<7I", buf, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported LUT version {version}")
    if min(nx, ny, nz, h_f, w_f, num_cameras) < 1:
        raise DecodeError(f"non-positive header field in {(nx, ny, nz, h_f, w_f, num_cameras)}")
    n = nx * ny * nz
    if len(buf) < 32 + 4 * n:
        raise TruncatedStreamError(
            f"truncated stream: {len(buf) - 32} entry bytes, expected {4 * n}"
        )
    if len(buf) > 32 + 4 * n:
        raise DecodeError(f"trailing bytes after {n} entries")
    entries = np.frombuffer(buf, dtype="<i4", count=n, offset=32).copy()
    limit = num_cameras * h_f * w_f
    if entries.size and (entries.min() < INVALID or entries.max() >= limit):
        raise EntryRangeError(f"entry out of range [-1, {limit})")
    if grid is None:
        grid = VoxelGridSpec((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (nx, ny, nz))
    elif grid.dims != (nx, ny, nz):
        raise DecodeError(f"grid dims {grid.dims} do not match stream dims {(nx, ny, nz)}")
    return ProjectionLUT(grid, (h_f, w_f), int(num_cameras), entries)


def write_lut(path, lut: ProjectionLUT) -> None:
    with open(path, "wb") as f:
        f.write(serialize_lut(lut))


def read_lut(path, grid: VoxelGridSpec | None = None) -> ProjectionLUT:
    with open(path, "rb") as f:
        return deserialize_lut(f.read(), grid)
