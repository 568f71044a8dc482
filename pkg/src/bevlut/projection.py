"""The two view-transformation execution paths.

``project_dense`` is the optimized path: a single gather through a
precomputed :class:`~bevlut.lut.ProjectionLUT` into one shared BEV tensor.
``project_sparse_baseline`` is the reference path it is measured against:
per-camera projection recomputed from calibration on every call, one sparse
voxel tensor per camera, then an explicit aggregation pass. The baseline
doubles as the correctness oracle, so both paths must agree voxel-for-voxel,
bitwise.

Both paths accept optional preallocated outputs (numpy ``out=`` style) so a
steady-state inference loop pays for compute and memory traffic, not for
the allocator; results are identical either way.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, RigConfigError
from .geometry import CameraCalibration, VoxelGridSpec, project_to_feature_cells
from .lut import LutBuildConfig, ProjectionLUT, _check_priority, rig_feature_dims


@dataclass(frozen=True, eq=False)
class FeatureMapSet:
    """Per-camera feature maps, shape (num_cameras, H_f, W_f, C), float32."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 4:
            raise DimensionMismatchError(f"feature maps must be rank 4, got {data.ndim}")
        object.__setattr__(self, "data", data)

    @property
    def num_cameras(self) -> int:
        return self.data.shape[0]

    @property
    def feature_dims(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


@dataclass(frozen=True, eq=False)
class BevTensor:
    """Dense BEV features, shape (Nx, Ny, Nz*C), z-major then c per cell."""

    nx: int
    ny: int
    nz: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        want = (self.nx, self.ny, self.nz * self.channels)
        if data.shape != want:
            raise DimensionMismatchError(f"BEV data shape {data.shape} != {want}")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, nx: int, ny: int, nz: int, channels: int) -> "BevTensor":
        return cls(nx, ny, nz, channels, np.zeros((nx, ny, nz * channels), np.float32))


@dataclass(frozen=True, eq=False)
class SparseVoxelSet:
    """Per-camera voxel tensors plus validity masks.

    ``data`` is (num_cameras, Nx, Ny, Nz*C) and ``mask`` (num_cameras, Nx,
    Ny, Nz); voxels whose mask bit is clear are exactly zero in ``data``.
    """

    nz: int
    channels: int
    data: np.ndarray
    mask: np.ndarray

    @property
    def num_cameras(self) -> int:
        return self.data.shape[0]


def _check_feats_against(feats: FeatureMapSet, num_cameras: int, feature_dims) -> None:
    if feats.num_cameras != num_cameras:
        raise DimensionMismatchError(
            f"feature maps carry {feats.num_cameras} cameras, expected {num_cameras}"
        )
    if feats.feature_dims != tuple(feature_dims):
        raise DimensionMismatchError(
            f"feature dims {feats.feature_dims} != expected {tuple(feature_dims)}"
        )


def _bev_buffer(out, nx: int, ny: int, nz: int, c: int) -> np.ndarray:
    if out is None:
        return np.empty((nx * ny * nz, c), dtype=np.float32)
    if out.shape != (nx, ny, nz * c) or out.dtype != np.float32 or not out.flags.c_contiguous:
        raise DimensionMismatchError(
            f"out buffer must be contiguous float32 of shape {(nx, ny, nz * c)}"
        )
    return out.reshape(nx * ny * nz, c)


def project_dense(
    lut: ProjectionLUT,
    feats: FeatureMapSet,
    threads: int = 1,
    out: np.ndarray | None = None,
) -> BevTensor:
    """Gather camera features into one dense BEV tensor via the LUT.

    No projection math runs here; every voxel is either a C-float copy from
    the stacked feature maps or zeros. ``threads > 1`` shards the gather
    over voxel ranges with output identical to the sequential path.
    """
    _check_feats_against(feats, lut.num_cameras, lut.feature_dims)
    nx, ny, nz = lut.grid.dims
    c = feats.channels
    flat_feats = feats.data.reshape(-1, c)
    entries = lut.entries
    flat_out = _bev_buffer(out, nx, ny, nz, c)

    def gather(lo: int, hi: int) -> None:
        # entries are range-checked at LUT construction, so the unchecked
        # clip mode is safe and skips numpy's slow per-element bounds path
        e = entries[lo:hi]
        np.take(
            flat_feats, np.where(e >= 0, e, 0), axis=0, out=flat_out[lo:hi], mode="clip"
        )
        flat_out[lo:hi][e < 0] = 0.0

    if threads <= 1:
        gather(0, entries.size)
    else:
        step = -(-entries.size // threads)
        bounds = [(i, min(i + step, entries.size)) for i in range(0, entries.size, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: gather(*b), bounds))
    return BevTensor(nx, ny, nz, c, flat_out.reshape(nx, ny, nz * c))


def project_sparse_baseline(
    rig: list[CameraCalibration],
    grid: VoxelGridSpec,
    cfg: LutBuildConfig,
    feats: FeatureMapSet,
    scratch: SparseVoxelSet | None = None,
) -> SparseVoxelSet:
    """Per-camera view transformation without any precomputation.

    Recomputes the voxel-to-pixel projection from calibration on every call
    and scatters each camera's features into its own sparse voxel tensor.
    This is the latency foil; keep it honest (vectorized, no deliberate
    waste) but do not cache any projection work between calls. ``scratch``
    may be the set returned by a previous call with matching dims; its
    stale entries are cleared before reuse.
    """
    h_f, w_f = rig_feature_dims(rig, cfg.feature_stride)
    _check_priority(rig, cfg.camera_priority)
    _check_feats_against(feats, len(rig), (h_f, w_f))

    nx, ny, nz = grid.dims
    n = grid.num_voxels
    c = feats.channels
    if scratch is None:
        data = np.zeros((len(rig), n, c), dtype=np.float32)
        mask = np.zeros((len(rig), n), dtype=bool)
    else:
        if scratch.data.shape != (len(rig), nx, ny, nz * c):
            raise DimensionMismatchError(
                f"scratch shape {scratch.data.shape} != {(len(rig), nx, ny, nz * c)}"
            )
        data = scratch.data.reshape(len(rig), n, c)
        mask = scratch.mask.reshape(len(rig), n)
        for cam in range(len(rig)):
            data[cam, mask[cam]] = 0.0
    centers = grid.centers()
    for cam in rig:
        valid, u_f, v_f, _ = project_to_feature_cells(
            cam, centers, cfg.feature_stride, cfg.near_clip
        )
        src = feats.data[cam.camera_id].reshape(-1, c)
        data[cam.camera_id, valid] = src[v_f[valid] * w_f + u_f[valid]]
        mask[cam.camera_id] = valid
    return SparseVoxelSet(
        nz,
        c,
        data.reshape(len(rig), nx, ny, nz * c),
        mask.reshape(len(rig), nx, ny, nz),
    )


def aggregate(
    sparse: SparseVoxelSet,
    priority: tuple[int, ...],
    out: np.ndarray | None = None,
) -> BevTensor:
    """Combine per-camera sparse voxels into one tensor, priority-first.

    For every voxel the first camera in ``priority`` whose mask bit is set
    contributes its feature vector; voxels with no set bit stay zero.
    """
    cams, nx, ny, fused = sparse.data.shape
    if sorted(priority) != list(range(cams)):
        raise RigConfigError(
            f"priority {list(priority)} is not a permutation of 0..{cams - 1}"
        )
    c = sparse.channels
    nz = sparse.nz
    flat = sparse.data.reshape(cams, nx * ny * nz, c)
    mask = sparse.mask.reshape(cams, nx * ny * nz)
    flat_out = _bev_buffer(out, nx, ny, nz, c)
    flat_out[:] = 0.0
    for cam_id in reversed(priority):  # earliest in priority written last, wins
        m = mask[cam_id]
        flat_out[m] = flat[cam_id, m]
    return BevTensor(nx, ny, nz, c, flat_out.reshape(nx, ny, nz * c))
