"""Ego-motion alignment of history BEV tensors and channel-concat fusion.

History frames arrive as already-projected BEV tensors (the saved-offline
inference mode); alignment is a planar inverse warp of the BEV lattice with
bilinear interpolation and zero fill outside the grid. Z slices share one
warp because the grid folds height into channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .geometry import EgoPose, VoxelGridSpec, relative_planar_pose
from .projection import BevTensor


@dataclass(frozen=True)
class FrameBundle:
    bev: BevTensor
    pose: EgoPose
    frame_offset: int  # 0 = current, 1..F-1 = history, nominally 0.5 s apart


def _source_indices(rel, grid: VoxelGridSpec, nx: int, ny: int):
    """Fractional source cell coordinates of the inverse warp.

    Built directly in index space so the identity transform lands exactly
    on integer cells: cos(0) and sin(0) are exact, so the affine degenerates
    to si = i, sj = j with no rounding.
    """
    tx, ty, yaw = rel
    c, s = math.cos(yaw), math.sin(yaw)
    x0, y0, _ = grid.origin
    dx, dy, _ = grid.cell
    # past-from-current applied to cell centers, expressed in cell units
    ox = (c * (x0 - tx) + s * (y0 - ty) - x0) / dx
    oy = (-s * (x0 - tx) + c * (y0 - ty) - y0) / dy
    ii, jj = np.meshgrid(
        np.arange(nx, dtype=np.float64), np.arange(ny, dtype=np.float64), indexing="ij"
    )
    si = c * ii + (s * dy / dx) * jj + ox
    sj = (-s * dx / dy) * ii + c * jj + oy
    return si, sj


def align_bev(history: BevTensor, rel, grid: VoxelGridSpec) -> BevTensor:
    """Warp a history BEV tensor into the current frame.

    ``rel`` is (tx, ty, yaw) of the current-from-past planar pose as
    returned by :func:`~bevlut.geometry.relative_planar_pose`. Source
    locations outside the grid contribute zeros.
    """
    nx, ny, nz = grid.dims
    if (history.nx, history.ny, history.nz) != (nx, ny, nz):
        raise DimensionMismatchError(
            f"history dims {(history.nx, history.ny, history.nz)} != grid dims {grid.dims}"
        )
    si, sj = _source_indices(rel, grid, nx, ny)
    i0 = np.floor(si)
    j0 = np.floor(sj)
    fi = si - i0
    fj = sj - j0
    i0 = i0.astype(np.int64)
    j0 = j0.astype(np.int64)

    data = history.data
    out = np.zeros((nx, ny, data.shape[2]), dtype=np.float64)
    for di, dj, w in (
        (0, 0, (1.0 - fi) * (1.0 - fj)),
        (1, 0, fi * (1.0 - fj)),
        (0, 1, (1.0 - fi) * fj),
        (1, 1, fi * fj),
    ):
        ci = i0 + di
        cj = j0 + dj
        inb = (ci >= 0) & (ci < nx) & (cj >= 0) & (cj < ny)
        vals = data[np.clip(ci, 0, nx - 1), np.clip(cj, 0, ny - 1)]
        out += (w * inb)[:, :, None] * vals
    return BevTensor(nx, ny, nz, history.channels, out.astype(np.float32))


def fuse_frames(
    bundles: list[FrameBundle], current_index: int, grid: VoxelGridSpec
) -> BevTensor:
    """Align history bundles to the current frame and concatenate channels.

    Output channel groups follow frame_offset order with the current frame
    first; the current frame passes through unwarped. The fused tensor has
    F * Nz * C channels per (i, j) cell, bookkept as nz = F * Nz.
    """
    if not 1 <= len(bundles) <= 4:
        raise ValueError(f"frame count must be 1..4, got {len(bundles)}")
    offsets = [b.frame_offset for b in bundles]
    if len(set(offsets)) != len(offsets):
        raise ValueError(f"duplicate frame_offsets: {offsets}")
    current = bundles[current_index]
    if current.frame_offset != 0:
        raise ValueError(
            f"bundle at current_index has frame_offset {current.frame_offset}, expected 0"
        )
    nx, ny, nz = grid.dims
    c = current.bev.channels
    for b in bundles:
        if (b.bev.nx, b.bev.ny, b.bev.nz, b.bev.channels) != (nx, ny, nz, c):
            raise DimensionMismatchError(
                f"bundle dims {(b.bev.nx, b.bev.ny, b.bev.nz, b.bev.channels)} "
                f"!= {(nx, ny, nz, c)}"
            )

    parts = []
    for b in sorted(bundles, key=lambda b: b.frame_offset):
        if b is current:
            parts.append(b.bev.data)
        else:
            rel = relative_planar_pose(b.pose, current.pose)
            parts.append(align_bev(b.bev, rel, grid).data)
    fused = np.concatenate(parts, axis=2)
    return BevTensor(nx, ny, len(bundles) * nz, c, fused)
