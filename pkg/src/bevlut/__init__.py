"""Multi-camera image-to-BEV view transformation with a precomputed LUT."""

from .augment import (
    AugmentRanges,
    BevAug,
    Box3D,
    ImageAug,
    apply_bev_aug,
    apply_image_aug,
    sample_bev_aug,
    sample_image_aug,
)
from .geometry import (
    CameraCalibration,
    EgoPose,
    Extrinsics,
    Intrinsics,
    VoxelGridSpec,
    compose,
    invert_rigid,
    project_point,
    project_to_feature_cells,
    relative_planar_pose,
    rigid_from_rt,
    rot_z,
)
from .lut import (
    LutBuildConfig,
    OccupancyReport,
    ProjectionLUT,
    build_lut,
    deserialize_lut,
    lut_stats,
    read_lut,
    serialize_lut,
    write_lut,
)
from .projection import (
    BevTensor,
    FeatureMapSet,
    SparseVoxelSet,
    aggregate,
    project_dense,
    project_sparse_baseline,
)
from .scene import (
    Beacon,
    SyntheticScene,
    load_nuscenes_calibration,
    make_nuscenes_like_rig,
    make_scene,
    render_beacons,
    save_nuscenes_calibration,
    straight_trajectory,
)
from .temporal import FrameBundle, align_bev, fuse_frames
from .tensorio import read_tensor, write_tensor

__version__ = "0.1.0"
