"""Latency harness for the two view-transformation paths.

Both paths run on identical random features, are equivalence-checked once
before any timing (a benchmark can never report speed for wrong results),
and are timed single-threaded by default so the headline ratio is fair.
LUT build time is reported but excluded from per-frame latency: the table
is precomputed once for a fixed rig. Median is the headline statistic.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import platform
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EquivalenceError, UnknownPresetError
from .geometry import CameraCalibration, VoxelGridSpec
from .lut import LutBuildConfig, build_lut, lut_stats, serialize_lut
from .projection import FeatureMapSet, aggregate, project_dense, project_sparse_baseline
from .scene import make_nuscenes_like_rig, straight_trajectory
from .temporal import FrameBundle, fuse_frames

# x/y span [-50, 50) m, z spans [-5, 3) m; cell sizes follow from the dims
GRID_PRESET_DIMS = {
    "200x200x4": (200, 200, 4),
    "200x200x6": (200, 200, 6),
    "250x250x6": (250, 250, 6),
    "300x300x6": (300, 300, 6),
    "400x400x12": (400, 400, 12),
}


def grid_preset(name: str) -> VoxelGridSpec:
    if name not in GRID_PRESET_DIMS:
        raise UnknownPresetError(
            f"unknown grid preset '{name}', have {sorted(GRID_PRESET_DIMS)}"
        )
    nx, ny, nz = GRID_PRESET_DIMS[name]
    dx, dy, dz = 100.0 / nx, 100.0 / ny, 8.0 / nz
    return VoxelGridSpec(
        origin=(-50.0 + dx / 2, -50.0 + dy / 2, -5.0 + dz / 2),
        cell=(dx, dy, dz),
        dims=(nx, ny, nz),
    )


@dataclass(frozen=True)
class BenchConfig:
    grid: str = "200x200x4"
    channels: int = 64
    feature_stride: int = 16
    frames: int = 1
    warmup: int = 2
    iters: int = 10
    threads: int = 1  # 1 = single; >1 = sharded dense path (never the headline)
    seed: int = 0
    calib: str | None = None  # path; None = builtin six-camera fixture

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError(f"iters must be >= 1, got {self.iters}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if self.frames not in (1, 2, 4):
            raise ValueError(f"frames must be 1, 2 or 4, got {self.frames}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.grid not in GRID_PRESET_DIMS:
            raise UnknownPresetError(
                f"unknown grid preset '{self.grid}', have {sorted(GRID_PRESET_DIMS)}"
            )

    @property
    def thread_mode(self) -> str:
        return "single" if self.threads <= 1 else f"sharded-{self.threads}"


@dataclass(frozen=True)
class LatencyStats:
    min_ms: float
    median_ms: float
    mean_ms: float
    p95_ms: float

    @classmethod
    def from_seconds(cls, samples) -> "LatencyStats":
        ms = np.asarray(samples) * 1e3
        return cls(
            min_ms=float(ms.min()),
            median_ms=float(np.median(ms)),
            mean_ms=float(ms.mean()),
            p95_ms=float(np.percentile(ms, 95)),
        )


@dataclass(frozen=True)
class BenchReport:
    grid: str
    grid_dims: tuple[int, int, int]
    voxels: int
    num_cameras: int
    feature_dims: tuple[int, int]
    channels: int
    frames: int
    iters: int
    warmup: int
    thread_mode: str
    seed: int
    lut_build_ms: float
    lut_size_bytes: int
    valid_fraction: float
    per_camera_fractions: tuple[float, ...]
    dense: LatencyStats
    baseline: LatencyStats
    speedup: float  # baseline median / dense median
    fusion_median_ms: float | None
    equivalence_checked: bool
    input_checksum: str
    cpu: str
    warnings: tuple[str, ...] = ()


def cpu_model() -> str:
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.lower().startswith("model name"):
                    name = line.split(":", 1)[1].strip()
                    if name and name != "unknown":
                        return name
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def _first_mismatch(a: np.ndarray, b: np.ndarray, dims) -> str:
    nx, ny, nz = dims
    flat_a = a.reshape(nx * ny * nz, -1)
    flat_b = b.reshape(nx * ny * nz, -1)
    bad = np.nonzero((flat_a != flat_b).any(axis=1))[0]
    v = int(bad[0])
    i, rem = divmod(v, ny * nz)
    j, k = divmod(rem, nz)
    return (
        f"first mismatching voxel ({i}, {j}, {k}): "
        f"dense {flat_a[v][:4].tolist()} vs baseline {flat_b[v][:4].tolist()}"
    )


def run_benchmark(cfg: BenchConfig, rig: list[CameraCalibration] | None = None) -> BenchReport:
    from .scene import load_nuscenes_calibration  # local to avoid cycle at import

    if rig is None:
        rig = (
            load_nuscenes_calibration(cfg.calib)
            if cfg.calib
            else make_nuscenes_like_rig("six_cam_default")
        )
    grid = grid_preset(cfg.grid)
    lut_cfg = LutBuildConfig(
        feature_stride=cfg.feature_stride,
        camera_priority=tuple(cam.camera_id for cam in rig),
    )

    t0 = time.perf_counter()
    lut = build_lut(rig, grid, lut_cfg)
    lut_build_ms = (time.perf_counter() - t0) * 1e3
    stats = lut_stats(lut)

    rng = np.random.default_rng(cfg.seed)
    h_f, w_f = lut.feature_dims
    feats = FeatureMapSet(
        rng.random((len(rig), h_f, w_f, cfg.channels), dtype=np.float32)
    )
    checksum = hashlib.sha256(feats.data.tobytes()).hexdigest()[:16]

    # first calls allocate; timed loops below reuse the buffers so both
    # paths are measured in steady state (inference-arena premise)
    dense_out = project_dense(lut, feats, threads=cfg.threads)
    scratch = project_sparse_baseline(rig, grid, lut_cfg, feats)
    baseline_out = aggregate(scratch, lut_cfg.camera_priority)
    if not np.array_equal(dense_out.data, baseline_out.data):
        raise EquivalenceError(_first_mismatch(dense_out.data, baseline_out.data, grid.dims))

    warnings = []
    res = time.get_clock_info("perf_counter").resolution
    if res > 1e-6:
        warnings.append(f"timer resolution {res:.2e}s is coarser than 1us")

    dense_buf = np.empty_like(dense_out.data)
    agg_buf = np.empty_like(baseline_out.data)
    for _ in range(cfg.warmup):
        project_dense(lut, feats, threads=cfg.threads, out=dense_buf)
        scratch = project_sparse_baseline(rig, grid, lut_cfg, feats, scratch=scratch)
        aggregate(scratch, lut_cfg.camera_priority, out=agg_buf)

    dense_times = []
    for _ in range(cfg.iters):
        t0 = time.perf_counter()
        project_dense(lut, feats, threads=cfg.threads, out=dense_buf)
        dense_times.append(time.perf_counter() - t0)

    baseline_times = []
    for _ in range(cfg.iters):
        t0 = time.perf_counter()
        scratch = project_sparse_baseline(rig, grid, lut_cfg, feats, scratch=scratch)
        aggregate(scratch, lut_cfg.camera_priority, out=agg_buf)
        baseline_times.append(time.perf_counter() - t0)

    fusion_median_ms = None
    if cfg.frames > 1:
        poses = straight_trajectory(cfg.frames, speed=5.0)
        bundles = [
            FrameBundle(bev=dense_out, pose=poses[len(poses) - 1 - off], frame_offset=off)
            for off in range(cfg.frames)
        ]
        fusion_times = []
        for _ in range(cfg.iters):
            t0 = time.perf_counter()
            fuse_frames(bundles, 0, grid)
            fusion_times.append(time.perf_counter() - t0)
        fusion_median_ms = LatencyStats.from_seconds(fusion_times).median_ms

    dense = LatencyStats.from_seconds(dense_times)
    baseline = LatencyStats.from_seconds(baseline_times)
    return BenchReport(
        grid=cfg.grid,
        grid_dims=grid.dims,
        voxels=grid.num_voxels,
        num_cameras=len(rig),
        feature_dims=lut.feature_dims,
        channels=cfg.channels,
        frames=cfg.frames,
        iters=cfg.iters,
        warmup=cfg.warmup,
        thread_mode=cfg.thread_mode,
        seed=cfg.seed,
        lut_build_ms=lut_build_ms,
        lut_size_bytes=len(serialize_lut(lut)),
        valid_fraction=stats.valid_fraction,
        per_camera_fractions=stats.per_camera_fractions,
        dense=dense,
        baseline=baseline,
        speedup=baseline.median_ms / dense.median_ms,
        fusion_median_ms=fusion_median_ms,
        equivalence_checked=True,
        input_checksum=checksum,
        cpu=cpu_model(),
        warnings=tuple(warnings),
    )


CSV_COLUMNS = [
    "grid", "voxels", "num_cameras", "feature_h", "feature_w", "channels",
    "frames", "iters", "warmup", "thread_mode", "seed",
    "lut_build_ms", "lut_size_bytes", "valid_fraction",
    "dense_min_ms", "dense_median_ms", "dense_mean_ms", "dense_p95_ms",
    "baseline_min_ms", "baseline_median_ms", "baseline_mean_ms", "baseline_p95_ms",
    "fusion_median_ms", "speedup", "input_checksum", "cpu",
]


def _csv_row(r: BenchReport) -> list:
    return [
        r.grid, r.voxels, r.num_cameras, r.feature_dims[0], r.feature_dims[1],
        r.channels, r.frames, r.iters, r.warmup, r.thread_mode, r.seed,
        f"{r.lut_build_ms:.3f}", r.lut_size_bytes, f"{r.valid_fraction:.4f}",
        f"{r.dense.min_ms:.4f}", f"{r.dense.median_ms:.4f}",
        f"{r.dense.mean_ms:.4f}", f"{r.dense.p95_ms:.4f}",
        f"{r.baseline.min_ms:.4f}", f"{r.baseline.median_ms:.4f}",
        f"{r.baseline.mean_ms:.4f}", f"{r.baseline.p95_ms:.4f}",
        "" if r.fusion_median_ms is None else f"{r.fusion_median_ms:.4f}",
        f"{r.speedup:.2f}", r.input_checksum, r.cpu,
    ]


def format_report(report: BenchReport, fmt: str = "table") -> str:
    if fmt == "json":
        return json.dumps(dataclasses.asdict(report), indent=2) + "\n"
    if fmt == "csv":
        import csv

        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(CSV_COLUMNS)
        w.writerow(_csv_row(report))
        return buf.getvalue()
    if fmt == "table":
        lines = [
            f"view transformation benchmark  [{report.cpu}]",
            f"  grid {report.grid} ({report.voxels} voxels), "
            f"{report.num_cameras} cameras, features "
            f"{report.feature_dims[0]}x{report.feature_dims[1]}x{report.channels}, "
            f"{report.thread_mode}, seed {report.seed}",
            f"  LUT: build {report.lut_build_ms:.1f} ms, "
            f"{report.lut_size_bytes / 1024:.0f} KiB, "
            f"{report.valid_fraction * 100:.1f}% voxels valid, per-camera "
            + "/".join(f"{f * 100:.0f}%" for f in report.per_camera_fractions),
            "  path       min      median   mean     p95      (ms, "
            f"{report.iters} iters)",
            f"  dense      {report.dense.min_ms:<8.3f} {report.dense.median_ms:<8.3f} "
            f"{report.dense.mean_ms:<8.3f} {report.dense.p95_ms:<8.3f}",
            f"  baseline   {report.baseline.min_ms:<8.3f} {report.baseline.median_ms:<8.3f} "
            f"{report.baseline.mean_ms:<8.3f} {report.baseline.p95_ms:<8.3f}",
            f"  speedup {report.speedup:.1f}x (baseline median / dense median)",
        ]
        if report.fusion_median_ms is not None:
            lines.append(
                f"  fusion ({report.frames} frames) median {report.fusion_median_ms:.3f} ms"
            )
        for w in report.warnings:
            lines.append(f"  warning: {w}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format '{fmt}', want table, csv or json")


def emit_report(report: BenchReport, fmt: str = "table", path=None) -> None:
    text = format_report(report, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as f:
            f.write(text)
