"""Command-line interface.

Subcommands: build-lut, project, bench, fuse, stats. Every flag can also
come from a JSON config file (--config); explicit flags override file
values. Exit code 0 on success; failures print the error class name and
message to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import bench as bench_mod
from .augment import AugmentRanges, sample_bev_aug, sample_image_aug, apply_bev_aug, apply_image_aug
from .bench import BenchConfig, emit_report, grid_preset, run_benchmark
from .errors import BevlutError
from .geometry import EgoPose, rigid_from_rt
from .lut import LutBuildConfig, build_lut, lut_stats, read_lut, write_lut
from .projection import FeatureMapSet, project_dense
from .scene import (
    load_nuscenes_calibration,
    make_nuscenes_like_rig,
    make_scene,
    quaternion_to_rotation,
    render_beacons,
    straight_trajectory,
)
from .temporal import FrameBundle, fuse_frames
from .tensorio import read_tensor, write_tensor

_BENCH_KEYS = ("grid", "channels", "frames", "iters", "warmup", "threads", "seed", "calib")


def _load_rig(calib: str | None):
    return load_nuscenes_calibration(calib) if calib else make_nuscenes_like_rig()


def _lut_cfg(rig, stride: int) -> LutBuildConfig:
    return LutBuildConfig(
        feature_stride=stride, camera_priority=tuple(cam.camera_id for cam in rig)
    )


def _merge_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """File values fill in wherever the flag was left at its default."""
    merged = vars(args).copy()
    cfg_path = merged.pop("config", None)
    if not cfg_path:
        return merged
    with open(cfg_path) as f:
        file_cfg = json.load(f)
    for key, value in file_cfg.items():
        if key == "augment":
            merged.setdefault("augment", value)
            continue
        if key in merged and merged[key] == parser_defaults.get(key):
            merged[key] = value
    return merged


def _apply_config_augment(rig, aug_cfg: dict | None):
    """Optional augmentation block: rewrites the rig before LUT build.

    Image augmentation defaults off here because rescaled image dims
    usually stop dividing the feature stride; BEV augmentation keeps dims
    and defaults on.
    """
    if not aug_cfg or not aug_cfg.get("enabled", True):
        return rig
    rng = np.random.default_rng(aug_cfg.get("seed", 0))
    ranges = AugmentRanges(**aug_cfg.get("ranges", {}))
    if aug_cfg.get("image", False):
        aug = sample_image_aug(rng, ranges)
        rig = [apply_image_aug(aug, cam) for cam in rig]
    if aug_cfg.get("bev", True):
        rig, _ = apply_bev_aug(sample_bev_aug(rng, ranges), rig, [])
    return rig


def _cmd_build_lut(ns) -> int:
    rig = _load_rig(ns.calib)
    lut = build_lut(rig, grid_preset(ns.grid), _lut_cfg(rig, ns.stride))
    write_lut(ns.out, lut)
    s = lut_stats(lut)
    print(
        f"wrote {ns.out}: grid {ns.grid}, features {lut.feature_dims[0]}x"
        f"{lut.feature_dims[1]}, {s.valid_fraction * 100:.1f}% voxels valid"
    )
    return 0


def _cmd_stats(ns) -> int:
    if ns.lut:
        lut = read_lut(ns.lut)
    else:
        rig = _load_rig(ns.calib)
        lut = build_lut(rig, grid_preset(ns.grid), _lut_cfg(rig, ns.stride))
    s = lut_stats(lut)
    if ns.format == "json":
        text = json.dumps(dataclasses.asdict(s) | {
            "per_camera_fractions": list(s.per_camera_fractions)}, indent=2) + "\n"
    elif ns.format == "csv":
        head = ["total_voxels", "valid_count", "valid_fraction"] + [
            f"camera_{i}_count" for i in range(len(s.per_camera_counts))
        ]
        row = [s.total_voxels, s.valid_count, f"{s.valid_fraction:.6f}", *s.per_camera_counts]
        text = ",".join(head) + "\n" + ",".join(str(v) for v in row) + "\n"
    else:
        lines = [
            f"voxels {s.total_voxels}, valid {s.valid_count} "
            f"({s.valid_fraction * 100:.1f}%)"
        ]
        for i, (cnt, frac) in enumerate(zip(s.per_camera_counts, s.per_camera_fractions)):
            lines.append(f"  camera {i}: {cnt} voxels ({frac * 100:.1f}%)")
        text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_project(ns) -> int:
    dims, data = read_tensor(ns.features)
    if len(dims) != 4:
        raise BevlutError(f"features tensor must be rank 4, got rank {len(dims)}")
    feats = FeatureMapSet(data)
    if ns.lut:
        lut = read_lut(ns.lut, grid_preset(ns.grid) if ns.grid else None)
    else:
        rig = _load_rig(ns.calib)
        lut = build_lut(rig, grid_preset(ns.grid), _lut_cfg(rig, ns.stride))
    bev = project_dense(lut, feats, threads=ns.threads)
    write_tensor(ns.out, bev.data.shape, bev.data)
    print(f"wrote {ns.out}: BEV {bev.data.shape[0]}x{bev.data.shape[1]}x{bev.data.shape[2]}")
    return 0


def _cmd_bench(ns) -> int:
    defaults = {
        "grid": "200x200x4", "channels": 64, "frames": 1, "iters": 10,
        "warmup": 2, "threads": 1, "seed": 0, "calib": None, "stride": 16,
    }
    merged = _merge_config(ns, defaults)
    cfg = BenchConfig(
        grid=merged["grid"],
        channels=merged["channels"],
        feature_stride=merged["stride"],
        frames=merged["frames"],
        warmup=merged["warmup"],
        iters=merged["iters"],
        threads=merged["threads"],
        seed=merged["seed"],
        calib=merged["calib"],
    )
    rig = _apply_config_augment(_load_rig(cfg.calib), merged.get("augment"))
    report = run_benchmark(cfg, rig=rig)
    emit_report(report, merged["format"], merged["out"])
    return 0


def _load_poses(path: str) -> list[EgoPose]:
    with open(path) as f:
        doc = json.load(f)
    poses = []
    for rec in doc["poses"] if isinstance(doc, dict) else doc:
        r = quaternion_to_rotation(rec.get("rotation", (1.0, 0.0, 0.0, 0.0)))
        m = rigid_from_rt(r, rec.get("translation", (0.0, 0.0, 0.0)))
        poses.append(EgoPose(m, timestamp=float(rec.get("timestamp", 0.0))))
    return poses


def _cmd_fuse(ns) -> int:
    grid = grid_preset(ns.grid)
    nx, ny, nz = grid.dims
    if ns.bev:
        poses = _load_poses(ns.poses)
        if len(poses) != len(ns.bev):
            raise BevlutError(f"{len(ns.bev)} tensors but {len(poses)} poses")
        bundles = []
        for off, (path, pose) in enumerate(zip(ns.bev, poses)):
            dims, data = read_tensor(path)
            if len(dims) != 3 or dims[:2] != (nx, ny) or dims[2] % nz:
                raise BevlutError(f"{path}: dims {dims} inconsistent with grid {ns.grid}")
            c = dims[2] // nz
            from .projection import BevTensor

            bundles.append(FrameBundle(BevTensor(nx, ny, nz, c, data), pose, off))
    else:
        # synthetic demo: beacons on a straight drive, current frame last
        rig = _load_rig(ns.calib)
        frames = ns.frames
        traj = straight_trajectory(frames, speed=ns.speed)
        rng = np.random.default_rng(ns.seed)
        radius = rng.uniform(8.0, 30.0, size=ns.beacons)
        angle = rng.uniform(-np.pi, np.pi, size=ns.beacons)
        positions = np.column_stack(
            [radius * np.cos(angle), radius * np.sin(angle), np.zeros(ns.beacons)]
        )
        scene = make_scene(rig, traj, positions, channels=ns.channels)
        lut_cfg = _lut_cfg(rig, ns.stride)
        bundles = []
        for off in range(frames):
            fidx = frames - 1 - off
            feats = render_beacons(scene, fidx, ns.stride)
            lut = build_lut(rig, grid, lut_cfg)
            bundles.append(
                FrameBundle(project_dense(lut, feats), traj[fidx], off)
            )
    fused = fuse_frames(bundles, 0, grid)
    write_tensor(ns.out, fused.data.shape, fused.data)
    print(
        f"wrote {ns.out}: fused {len(bundles)} frames -> "
        f"{fused.data.shape[0]}x{fused.data.shape[1]}x{fused.data.shape[2]}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bevlut", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_default="200x200x4"):
        sp.add_argument("--calib", default=None, help="calibration JSON (default: builtin rig)")
        sp.add_argument("--grid", default=grid_default, choices=sorted(bench_mod.GRID_PRESET_DIMS))
        sp.add_argument("--stride", type=int, default=16, help="feature stride")

    sp = sub.add_parser("build-lut", help="precompute and write a projection table")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_build_lut)

    sp = sub.add_parser("stats", help="occupancy report for a LUT")
    common(sp)
    sp.add_argument("--lut", default=None, help="read a serialized LUT instead of building")
    sp.add_argument("--format", choices=("table", "csv", "json"), default="table")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=_cmd_stats)

    sp = sub.add_parser("project", help="dense-project a feature tensor to BEV")
    common(sp)
    sp.add_argument("--lut", default=None)
    sp.add_argument("--features", required=True, help="rank-4 tensor file (cams, H, W, C)")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_project)

    sp = sub.add_parser("bench", help="time both view-transformation paths")
    common(sp)
    sp.add_argument("--config", default=None, help="JSON config mirroring these flags")
    sp.add_argument("--channels", type=int, default=64)
    sp.add_argument("--frames", type=int, default=1, choices=(1, 2, 4))
    sp.add_argument("--iters", type=int, default=10)
    sp.add_argument("--warmup", type=int, default=2)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("table", "csv", "json"), default="table")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=_cmd_bench)

    sp = sub.add_parser("fuse", help="align and concatenate multi-frame BEV tensors")
    common(sp)
    sp.add_argument("--bev", action="append", default=None,
                    help="BEV tensor file, repeatable, current frame first")
    sp.add_argument("--poses", default=None, help="JSON pose list matching --bev order")
    sp.add_argument("--frames", type=int, default=4, choices=(1, 2, 4))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--speed", type=float, default=5.0, help="synthetic ego speed m/s")
    sp.add_argument("--beacons", type=int, default=8)
    sp.add_argument("--channels", type=int, default=16)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_fuse)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.fn(ns)
    except BevlutError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
