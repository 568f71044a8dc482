"""Generate and vet the frozen six-camera rig fixture.

Sweeps nothing automatically; edit the knobs below, run, and inspect the
per-camera claim/visibility fractions (target 0.17 +/- 0.05 on the
200x200x4 grid) and the ground-plane coverage check (every z=0 point
within 45 m of the origin and outside a 1 m blind radius must be visible
to at least one camera). Pass --write to freeze the numbers into
src/bevlut/fixtures/six_cam_default.json.
"""

import argparse
import math
import sys

import numpy as np

from bevlut.geometry import (
    CameraCalibration,
    Extrinsics,
    Intrinsics,
    VoxelGridSpec,
    invert_rigid,
    project_to_feature_cells,
    rigid_from_rt,
)
from bevlut.lut import LutBuildConfig, build_lut, lut_stats
from bevlut.scene import save_nuscenes_calibration

# ---- knobs ----------------------------------------------------------------
WIDTH, HEIGHT = 832, 832
FOCAL = 542.0
PITCH_DEG = 36.0
CAM_HEIGHT = 1.6
# name, mount (x, y), yaw degrees
MOUNTS = [
    ("front_left", (0.4, 0.3), 60.0),
    ("front", (0.5, 0.0), 0.0),
    ("front_right", (0.4, -0.3), -60.0),
    ("back_left", (-0.4, 0.3), 120.0),
    ("back", (-0.5, 0.0), 180.0),
    ("back_right", (-0.4, -0.3), -120.0),
]
# ---------------------------------------------------------------------------

GRID = VoxelGridSpec(origin=(-49.75, -49.75, -4.0), cell=(0.5, 0.5, 2.0), dims=(200, 200, 4))


def camera_from_mount(cam_id, name, mount_xy, yaw_deg, pitch_deg):
    yaw = math.radians(yaw_deg)
    pitch = math.radians(pitch_deg)
    # camera axes in ego coords: z optical (forward/down), x right, y down
    cam_z = np.array(
        [math.cos(pitch) * math.cos(yaw), math.cos(pitch) * math.sin(yaw), -math.sin(pitch)]
    )
    cam_x = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    cam_y = np.cross(cam_z, cam_x)
    r_ego_from_cam = np.column_stack([cam_x, cam_y, cam_z])
    t = np.array([mount_xy[0], mount_xy[1], CAM_HEIGHT])
    ego_from_cam = rigid_from_rt(r_ego_from_cam, t)
    return CameraCalibration(
        camera_id=cam_id,
        intrinsics=Intrinsics.pinhole(FOCAL, FOCAL, WIDTH / 2.0, HEIGHT / 2.0),
        extrinsics=Extrinsics(invert_rigid(ego_from_cam)),
        image_width=WIDTH,
        image_height=HEIGHT,
        name=name,
    )


def build_rig():
    return [
        camera_from_mount(i, name, xy, yaw, PITCH_DEG)
        for i, (name, xy, yaw) in enumerate(MOUNTS)
    ]


def report(rig):
    cfg = LutBuildConfig(feature_stride=16, camera_priority=tuple(range(6)))
    lut = build_lut(rig, GRID, cfg)
    stats = lut_stats(lut)
    centers = GRID.centers()
    print(f"grid {GRID.dims}, total voxels {stats.total_voxels}, "
          f"valid fraction {stats.valid_fraction:.3f}")
    ok = True
    for cam in rig:
        claim = stats.per_camera_counts[cam.camera_id] / stats.total_voxels
        valid, _, _, _ = project_to_feature_cells(cam, centers, 16)
        vis = valid.mean()
        flag = "" if 0.12 <= claim <= 0.22 and 0.12 <= vis <= 0.22 else "  <-- OUT"
        ok &= not flag
        print(f"  {cam.name:12s} claim {claim:.3f}  visible {vis:.3f}{flag}")

    # ground-plane sweep: z=0, radius (1, 45], 0.25 m steps
    xs = np.arange(-45.0, 45.0 + 1e-9, 0.25)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    r = np.hypot(gx, gy)
    sel = (r > 1.0) & (r <= 45.0)
    pts = np.column_stack([gx[sel], gy[sel], np.zeros(sel.sum())])
    seen = np.zeros(len(pts), dtype=bool)
    for cam in rig:
        valid, _, _, _ = project_to_feature_cells(cam, pts, 16)
        seen |= valid
    holes = (~seen).sum()
    print(f"ground sweep: {len(pts)} points, {holes} holes")
    if holes:
        hp = pts[~seen][:10]
        print("  first holes:", np.round(hp[:, :2], 2).tolist())
        ok = False
    return ok


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true", help="freeze fixture JSON")
    ap.add_argument("--out", default="src/bevlut/fixtures/six_cam_default.json")
    args = ap.parse_args()
    rig = build_rig()
    ok = report(rig)
    if args.write:
        if not ok:
            print("refusing to write: fixture out of tolerance", file=sys.stderr)
            return 1
        save_nuscenes_calibration(args.out, rig)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
