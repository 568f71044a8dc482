import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bevlut import (
    BevTensor,
    FeatureMapSet,
    LutBuildConfig,
    ProjectionLUT,
    VoxelGridSpec,
    aggregate,
    build_lut,
    lut_stats,
    project_dense,
    project_sparse_baseline,
)
from bevlut.errors import DimensionMismatchError, RigConfigError
from bevlut.geometry import project_to_feature_cells

from conftest import make_camera, random_rig

st_seed = st.integers(0, 2**32 - 1)


def rand_feats(rng, cams, h, w, c):
    return FeatureMapSet(rng.normal(size=(cams, h, w, c)).astype(np.float32))


def build_instance(rng, max_dim=16, max_cams=3, max_c=8):
    cams = int(rng.integers(1, max_cams + 1))
    rig = random_rig(rng, cams)
    grid = VoxelGridSpec(
        tuple(rng.uniform(-10, 0, 3)),
        tuple(rng.uniform(0.4, 2.0, 3)),
        (int(rng.integers(1, max_dim)), int(rng.integers(1, max_dim)), int(rng.integers(1, 5))),
    )
    cfg = LutBuildConfig(4, tuple(rng.permutation(cams).tolist()))
    c = int(rng.integers(1, max_c + 1))
    feats = rand_feats(rng, cams, rig[0].image_height // 4, rig[0].image_width // 4, c)
    return rig, grid, cfg, feats


def test_all_invalid_lut_gives_zeros():
    grid = VoxelGridSpec((0, 0, 0), (1, 1, 1), (3, 2, 2))
    lut = ProjectionLUT(grid, (4, 4), 1, np.full(12, -1, np.int32))
    feats = FeatureMapSet(np.ones((1, 4, 4, 5), np.float32))
    out = project_dense(lut, feats)
    assert out.data.shape == (3, 2, 2 * 5)
    assert not out.data.any()


def test_single_gather_places_vector():
    grid = VoxelGridSpec((0, 0, 0), (1, 1, 1), (2, 2, 1))
    entries = np.full(4, -1, np.int32)
    entries[0] = 2 * 4 + 3  # voxel (0,0,0) <- feature (v=2, u=3)
    lut = ProjectionLUT(grid, (4, 4), 1, entries)
    feats = np.zeros((1, 4, 4, 3), np.float32)
    feats[0, 2, 3] = (1.0, 2.0, 3.0)
    out = project_dense(lut, FeatureMapSet(feats))
    assert np.array_equal(out.data[0, 0], [1.0, 2.0, 3.0])
    rest = out.data.copy()
    rest[0, 0] = 0
    assert not rest.any()


@settings(max_examples=40)
@given(st_seed)
def test_cross_path_equivalence(seed):
    """The module's central test: gather-through-LUT == sparse + aggregate."""
    rng = np.random.default_rng(seed)
    rig, grid, cfg, feats = build_instance(rng)
    dense = project_dense(build_lut(rig, grid, cfg), feats)
    sparse = project_sparse_baseline(rig, grid, cfg, feats)
    agg = aggregate(sparse, cfg.camera_priority)
    assert np.array_equal(dense.data, agg.data)


@given(st_seed)
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    rig, grid, cfg, feats = build_instance(rng, max_cams=2)
    lut = build_lut(rig, grid, cfg)
    a = np.float32(rng.uniform(-3, 3))
    scaled = FeatureMapSet(a * feats.data)
    assert np.array_equal(project_dense(lut, scaled).data, a * project_dense(lut, feats).data)


def test_zero_features_zero_output(small_grid):
    rng = np.random.default_rng(0)
    rig = random_rig(rng, 2)
    cfg = LutBuildConfig(4, (0, 1))
    feats = FeatureMapSet(np.zeros((2, 12, 16, 4), np.float32))
    assert not project_dense(build_lut(rig, small_grid, cfg), feats).data.any()
    sparse = project_sparse_baseline(rig, small_grid, cfg, feats)
    assert not sparse.data.any()
    assert not aggregate(sparse, cfg.camera_priority).data.any()


def test_grid_behind_all_cameras_has_empty_masks():
    cam = make_camera(0, yaw=0.0)
    grid = VoxelGridSpec((-12.0, -2.0, 0.0), (1.0, 1.0, 1.0), (4, 4, 2))
    cfg = LutBuildConfig(4, (0,))
    feats = FeatureMapSet(np.ones((1, 24, 32, 2), np.float32))
    sparse = project_sparse_baseline([cam], grid, cfg, feats)
    assert not sparse.mask.any()
    assert not sparse.data.any()


def test_mask_density_at_least_claim_fraction(six_cam_rig, bench_grid):
    cfg = LutBuildConfig(16, tuple(range(6)))
    lut = build_lut(six_cam_rig, bench_grid, cfg)
    stats = lut_stats(lut)
    feats = FeatureMapSet(np.ones((6, 52, 52, 2), np.float32))
    sparse = project_sparse_baseline(six_cam_rig, bench_grid, cfg, feats)
    for cam in range(6):
        density = sparse.mask[cam].mean()
        assert density >= stats.per_camera_counts[cam] / stats.total_voxels - 1e-12


def test_masked_off_voxels_exactly_zero(small_grid):
    rng = np.random.default_rng(2)
    rig = random_rig(rng, 2)
    cfg = LutBuildConfig(4, (0, 1))
    feats = rand_feats(rng, 2, 12, 16, 3)
    sparse = project_sparse_baseline(rig, small_grid, cfg, feats)
    for cam in range(2):
        data = sparse.data[cam].reshape(-1, 3)
        mask = sparse.mask[cam].reshape(-1)
        assert not data[~mask].any()


def test_aggregate_single_camera_identity(small_grid):
    rng = np.random.default_rng(4)
    rig = random_rig(rng, 1)
    cfg = LutBuildConfig(4, (0,))
    feats = rand_feats(rng, 1, 12, 16, 3)
    sparse = project_sparse_baseline(rig, small_grid, cfg, feats)
    agg = aggregate(sparse, (0,))
    assert np.array_equal(agg.data, sparse.data[0])


def test_aggregate_priority_first_wins():
    # both cameras claim voxel 0 with different vectors
    data = np.zeros((2, 1, 1, 2), np.float32)
    mask = np.zeros((2, 1, 1, 1), dtype=bool)
    data[0, 0, 0] = (1.0, 1.0)
    data[1, 0, 0] = (2.0, 2.0)
    mask[:, 0, 0, 0] = True
    from bevlut.projection import SparseVoxelSet

    sparse = SparseVoxelSet(1, 2, data, mask)
    assert np.array_equal(aggregate(sparse, (0, 1)).data[0, 0], [1.0, 1.0])
    assert np.array_equal(aggregate(sparse, (1, 0)).data[0, 0], [2.0, 2.0])
    with pytest.raises(RigConfigError):
        aggregate(sparse, (0, 0))


def test_sharded_matches_sequential(six_cam_rig, bench_grid):
    rng = np.random.default_rng(9)
    cfg = LutBuildConfig(16, tuple(range(6)))
    lut = build_lut(six_cam_rig, bench_grid, cfg)
    feats = rand_feats(rng, 6, 52, 52, 8)
    seq = project_dense(lut, feats, threads=1)
    for threads in (2, 3, 7):
        assert np.array_equal(project_dense(lut, feats, threads=threads).data, seq.data)


def test_out_buffer_reuse_matches(small_grid):
    rng = np.random.default_rng(12)
    rig = random_rig(rng, 2)
    cfg = LutBuildConfig(4, (1, 0))
    lut = build_lut(rig, small_grid, cfg)
    feats_a = rand_feats(rng, 2, 12, 16, 3)
    feats_b = rand_feats(rng, 2, 12, 16, 3)
    buf = np.empty((16, 16, 9), np.float32)
    out_a = project_dense(lut, feats_a, out=buf)
    assert np.shares_memory(out_a.data, buf)
    fresh_b = project_dense(lut, feats_b)
    assert np.array_equal(project_dense(lut, feats_b, out=buf).data, fresh_b.data)
    # baseline scratch reuse must clear stale voxels
    scratch = project_sparse_baseline(rig, small_grid, cfg, feats_a)
    reused = project_sparse_baseline(rig, small_grid, cfg, feats_b, scratch=scratch)
    fresh = project_sparse_baseline(rig, small_grid, cfg, feats_b)
    assert np.array_equal(reused.data, fresh.data)
    assert np.array_equal(reused.mask, fresh.mask)
    agg_buf = np.empty((16, 16, 9), np.float32)
    agg_buf.fill(7.0)
    assert np.array_equal(
        aggregate(fresh, cfg.camera_priority, out=agg_buf).data,
        aggregate(fresh, cfg.camera_priority).data,
    )


def test_dimension_mismatch_errors(small_grid):
    rng = np.random.default_rng(5)
    rig = random_rig(rng, 2)
    cfg = LutBuildConfig(4, (0, 1))
    lut = build_lut(rig, small_grid, cfg)
    with pytest.raises(DimensionMismatchError, match="cameras"):
        project_dense(lut, rand_feats(rng, 3, 12, 16, 2))
    with pytest.raises(DimensionMismatchError, match="feature dims"):
        project_dense(lut, rand_feats(rng, 2, 6, 16, 2))
    with pytest.raises(DimensionMismatchError, match="out buffer"):
        project_dense(lut, rand_feats(rng, 2, 12, 16, 2), out=np.zeros((2, 2, 2), np.float32))
    with pytest.raises(DimensionMismatchError):
        BevTensor(2, 2, 2, 2, np.zeros((2, 2, 2), np.float32))
