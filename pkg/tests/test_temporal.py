import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from bevlut import (
    BevTensor,
    EgoPose,
    FrameBundle,
    VoxelGridSpec,
    align_bev,
    fuse_frames,
    invert_rigid,
    relative_planar_pose,
)
from bevlut.errors import DimensionMismatchError

st_seed = st.integers(0, 2**32 - 1)


def bev_of(rng, nx, ny, nz, c):
    return BevTensor(nx, ny, nz, c, rng.random((nx, ny, nz * c)).astype(np.float32))


def symmetric_grid(n=8, d=0.5, nz=2):
    h = (n - 1) / 2.0 * d
    return VoxelGridSpec((-h, -h, 0.0), (d, d, 1.0), (n, n, nz))


def planar_matrix(tx, ty, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])


def test_identity_warp_is_exact():
    rng = np.random.default_rng(0)
    grid = VoxelGridSpec((-13.3, 4.7, -1.0), (0.37, 0.61, 0.5), (9, 7, 3))
    bev = bev_of(rng, 9, 7, 3, 4)
    out = align_bev(bev, (0.0, 0.0, 0.0), grid)
    assert np.array_equal(out.data, bev.data)


def test_one_cell_shift():
    # binary-exact grid values so the shift lands on integer cells
    grid = VoxelGridSpec((-4.0, -4.0, 0.0), (0.5, 0.5, 1.0), (8, 8, 1))
    rng = np.random.default_rng(1)
    bev = bev_of(rng, 8, 8, 1, 3)
    out = align_bev(bev, (0.5, 0.0, 0.0), grid)  # +x by exactly one cell
    assert np.array_equal(out.data[1:], bev.data[:-1])
    assert not out.data[0].any()
    out_y = align_bev(bev, (0.0, -1.0, 0.0), grid)  # -y by exactly two cells
    assert np.array_equal(out_y.data[:, :-2], bev.data[:, 2:])
    assert not out_y.data[:, -2:].any()


def test_quarter_turn_matches_rot90():
    grid = symmetric_grid(n=10)
    rng = np.random.default_rng(2)
    bev = bev_of(rng, 10, 10, 2, 3)
    out = align_bev(bev, (0.0, 0.0, math.pi / 2), grid)
    assert_allclose(out.data, np.rot90(bev.data, k=1, axes=(0, 1)), atol=1e-5)
    out_neg = align_bev(bev, (0.0, 0.0, -math.pi / 2), grid)
    assert_allclose(out_neg.data, np.rot90(bev.data, k=-1, axes=(0, 1)), atol=1e-5)


@given(st_seed)
def test_mass_never_created(seed):
    rng = np.random.default_rng(seed)
    grid = symmetric_grid(n=12, d=1.0)
    bev = bev_of(rng, 12, 12, 2, 2)
    rel = (rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-math.pi, math.pi))
    out = align_bev(bev, rel, grid)
    assert out.data.sum() <= bev.data.sum() * (1 + 1e-6) + 1e-4


def test_mass_preserved_when_footprint_stays_in_grid():
    # translation only: the bilinear tent is a partition of unity on a
    # translated lattice, so interior mass is carried over exactly
    grid = VoxelGridSpec((-8.0, -8.0, 0.0), (1.0, 1.0, 1.0), (17, 17, 1))
    data = np.zeros((17, 17, 2), np.float32)
    data[7:10, 7:10] = 1.0  # interior blob
    bev = BevTensor(17, 17, 1, 2, data)
    out = align_bev(bev, (1.3, -0.8, 0.0), grid)
    assert_allclose(out.data.sum(), bev.data.sum(), rtol=1e-6)


def test_warp_composition_on_smooth_field():
    n = 48
    grid = symmetric_grid(n=n, d=1.0, nz=1)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    # band-limited: one gentle cycle across four grid widths
    field = (2.0 + np.cos(2 * np.pi * ii / (4 * n)) * np.sin(2 * np.pi * jj / (4 * n)))
    bev = BevTensor(n, n, 1, 1, field[:, :, None].astype(np.float32))
    rel1 = (1.3, -0.6, 0.12)
    rel2 = (-0.4, 0.9, -0.07)
    twice = align_bev(align_bev(bev, rel1, grid), rel2, grid)
    m = planar_matrix(*rel2) @ planar_matrix(*rel1)
    composed = (float(m[0, 2]), float(m[1, 2]), math.atan2(m[1, 0], m[0, 0]))
    once = align_bev(bev, composed, grid)
    # compare away from the zero-filled boundary
    a, b = twice.data[6:-6, 6:-6], once.data[6:-6, 6:-6]
    rel_err = np.abs(a - b).max() / np.abs(b).max()
    assert rel_err < 1e-3


class TestFuseFrames:
    def _pose(self, x=0.0, y=0.0, yaw=0.0, t=0.0):
        m = np.eye(4)
        c, s = math.cos(yaw), math.sin(yaw)
        m[:2, :2] = [[c, -s], [s, c]]
        m[0, 3], m[1, 3] = x, y
        return EgoPose(m, timestamp=t)

    def test_single_frame_passthrough(self, small_grid):
        rng = np.random.default_rng(3)
        bev = bev_of(rng, 16, 16, 3, 2)
        out = fuse_frames([FrameBundle(bev, self._pose(x=3.0, yaw=0.4), 0)], 0, small_grid)
        assert np.array_equal(out.data, bev.data)

    def test_identical_poses_concat_raw(self, small_grid):
        rng = np.random.default_rng(4)
        a = bev_of(rng, 16, 16, 3, 2)
        b = bev_of(rng, 16, 16, 3, 2)
        pose = self._pose(x=1.0)
        out = fuse_frames(
            [FrameBundle(a, pose, 0), FrameBundle(b, pose, 1)], 0, small_grid
        )
        assert out.data.shape == (16, 16, 12)
        assert np.array_equal(out.data[:, :, :6], a.data)
        assert np.array_equal(out.data[:, :, 6:], b.data)

    def test_channel_group_order_follows_frame_offset(self, small_grid):
        rng = np.random.default_rng(5)
        bevs = [bev_of(rng, 16, 16, 3, 2) for _ in range(4)]
        pose = self._pose()
        bundles = [FrameBundle(bevs[off], pose, off) for off in (2, 0, 3, 1)]
        out = fuse_frames(bundles, 1, small_grid)
        assert out.data.shape[2] == 4 * 3 * 2
        for off in range(4):
            assert np.array_equal(out.data[:, :, off * 6 : (off + 1) * 6], bevs[off].data)

    def test_static_feature_lands_on_same_cell(self):
        """Straight-line ego motion; a static blob must stack across groups."""
        grid = VoxelGridSpec((-15.5, -15.5, 0.0), (1.0, 1.0, 1.0), (32, 32, 1))
        speed, dt = 4.0, 0.5
        g = np.array([6.0, 3.0])  # static global position
        bundles = []
        for off in range(4):  # offset 0 = latest frame
            t = (3 - off) * dt
            pose = self._pose(x=speed * t, t=t)
            ego = (invert_rigid(pose.matrix) @ np.array([*g, 0.0, 1.0]))[:2]
            i = int(round((ego[0] - grid.origin[0]) / grid.cell[0]))
            j = int(round((ego[1] - grid.origin[1]) / grid.cell[1]))
            data = np.zeros((32, 32, 1), np.float32)
            data[i, j] = 1.0
            bundles.append(FrameBundle(BevTensor(32, 32, 1, 1, data), pose, off))
        out = fuse_frames(bundles, 0, grid)
        peaks = [
            np.unravel_index(np.argmax(out.data[:, :, c]), (32, 32)) for c in range(4)
        ]
        assert len(set(peaks)) == 1
        # and the shared peak is the current frame's own cell
        cur = np.unravel_index(np.argmax(bundles[0].bev.data[:, :, 0]), (32, 32))
        assert peaks[0] == cur

    def test_errors(self, small_grid):
        rng = np.random.default_rng(6)
        bev = bev_of(rng, 16, 16, 3, 2)
        pose = self._pose()
        with pytest.raises(ValueError, match="frame count"):
            fuse_frames([], 0, small_grid)
        with pytest.raises(ValueError, match="frame count"):
            fuse_frames([FrameBundle(bev, pose, off) for off in range(5)], 0, small_grid)
        with pytest.raises(ValueError, match="duplicate"):
            fuse_frames(
                [FrameBundle(bev, pose, 0), FrameBundle(bev, pose, 0)], 0, small_grid
            )
        with pytest.raises(ValueError, match="frame_offset"):
            fuse_frames(
                [FrameBundle(bev, pose, 1), FrameBundle(bev, pose, 0)], 0, small_grid
            )
        small = bev_of(rng, 8, 16, 3, 2)
        with pytest.raises(DimensionMismatchError):
            fuse_frames(
                [FrameBundle(bev, pose, 0), FrameBundle(small, pose, 1)], 0, small_grid
            )
        with pytest.raises(DimensionMismatchError):
            align_bev(small, (0, 0, 0), small_grid)
