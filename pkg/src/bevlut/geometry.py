"""Camera and rigid-body math for image-to-BEV projection.

Conventions used throughout the package:

* Extrinsics map ego-frame points into the camera frame (camera-from-ego),
  so the projection chain is ``pixel = K @ (E @ p_ego)`` with no inversion
  in the hot path. Camera axes are the usual computer-vision ones: x right,
  y down, z forward.
* Ego poses map ego-frame points into a fixed global frame (global-from-ego).
* There is no depth estimation: a 3D point claims the pixel its ray hits,
  and the only use of depth is validity gating against a near plane.
* Projected pixels map to feature-map cells by flooring, ``floor(u / stride)``,
  never rounding, so integer gather tables and their oracles agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError

NEAR_CLIP_DEFAULT = 0.1  # meters; excludes degenerate divisions near z=0

_RIGID_TOL = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def check_rigid(m: np.ndarray, what: str = "transform", tol: float = _RIGID_TOL) -> np.ndarray:
    """Validate a 4x4 homogeneous rigid transform; returns it as float64."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (4, 4):
        raise CalibrationError(f"{what} must be 4x4, got {m.shape}")
    if not np.array_equal(m[3], (0.0, 0.0, 0.0, 1.0)):
        raise CalibrationError(f"{what} bottom row must be exactly (0, 0, 0, 1)")
    r = m[:3, :3]
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        raise CalibrationError(f"{what} rotation block is not orthonormal within {tol}")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise CalibrationError(f"{what} rotation block determinant is not +1 within {tol}")
    return m


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole projection parameters as a 3x3 row-major matrix.

    Rig calibrations are strict pinhole matrices (construct via
    :meth:`pinhole`). Image augmentation composes an affine pixel transform
    onto K, which legitimately breaks upper-triangularity, so the matrix
    constructor only enforces what projection itself needs: an exact
    (0, 0, 1) bottom row and an invertible 2x2 pixel block.
    """

    k: np.ndarray

    def __post_init__(self):
        k = np.array(self.k, dtype=np.float64)
        if k.shape != (3, 3):
            raise CalibrationError(f"intrinsic matrix must be 3x3, got {k.shape}")
        if not np.array_equal(k[2], (0.0, 0.0, 1.0)):
            raise CalibrationError("intrinsic bottom row must be exactly (0, 0, 1)")
        if abs(k[0, 0] * k[1, 1] - k[0, 1] * k[1, 0]) < 1e-12:
            raise CalibrationError("intrinsic pixel block is singular")
        object.__setattr__(self, "k", _freeze(k))

    @classmethod
    def pinhole(cls, fx: float, fy: float, cx: float, cy: float) -> "Intrinsics":
        if fx <= 0 or fy <= 0:
            raise CalibrationError(f"focal lengths must be positive, got fx={fx}, fy={fy}")
        return cls(np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))

    @property
    def fx(self) -> float:
        return float(self.k[0, 0])

    @property
    def fy(self) -> float:
        return float(self.k[1, 1])

    @property
    def cx(self) -> float:
        return float(self.k[0, 2])

    @property
    def cy(self) -> float:
        return float(self.k[1, 2])


@dataclass(frozen=True)
class Extrinsics:
    """4x4 rigid transform taking ego-frame points to the camera frame."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(check_rigid(self.matrix, "extrinsics")))

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, r: np.ndarray, t: np.ndarray) -> "Extrinsics":
        return cls(rigid_from_rt(r, t))

    @classmethod
    def similarity(cls, matrix: np.ndarray) -> "Extrinsics":
        """Relaxed constructor for augmentation-composed transforms.

        BEV augmentation folds flips and uniform scaling into the
        extrinsics, so the rotation block of the result is a scaled
        (possibly reflected) orthogonal matrix rather than a rotation.
        Only what projection needs is enforced: an exact homogeneous
        bottom row and an invertible block.
        """
        m = np.array(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise CalibrationError(f"extrinsics must be 4x4, got {m.shape}")
        if not np.array_equal(m[3], (0.0, 0.0, 0.0, 1.0)):
            raise CalibrationError("extrinsics bottom row must be exactly (0, 0, 0, 1)")
        if abs(np.linalg.det(m[:3, :3])) < 1e-12:
            raise CalibrationError("extrinsics block is singular")
        e = object.__new__(cls)
        object.__setattr__(e, "matrix", _freeze(m))
        return e

    def inverse(self) -> "Extrinsics":
        return Extrinsics(invert_rigid(self.matrix))


@dataclass(frozen=True)
class EgoPose:
    """4x4 rigid transform taking ego-frame points to the global frame."""

    matrix: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(check_rigid(self.matrix, "ego pose")))


@dataclass(frozen=True)
class CameraCalibration:
    camera_id: int
    intrinsics: Intrinsics
    extrinsics: Extrinsics
    image_width: int
    image_height: int
    name: str = ""

    def __post_init__(self):
        if self.camera_id < 0:
            raise CalibrationError(f"camera_id must be non-negative, got {self.camera_id}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise CalibrationError(
                f"image dims must be positive, got {self.image_width}x{self.image_height}"
            )


@dataclass(frozen=True)
class VoxelGridSpec:
    """BEV sampling lattice.

    ``origin`` is the metric center of cell (0, 0, 0); the center of cell
    (i, j, k) is ``origin + (i*dx, j*dy, k*dz)``. Flat layout order is
    k fastest, then j, then i (i slowest), matching C order of (Nx, Ny, Nz).
    """

    origin: tuple[float, float, float]
    cell: tuple[float, float, float]
    dims: tuple[int, int, int]

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        cell = tuple(float(v) for v in self.cell)
        dims = tuple(int(v) for v in self.dims)
        if len(origin) != 3 or len(cell) != 3 or len(dims) != 3:
            raise CalibrationError("origin, cell and dims must each have 3 components")
        if any(c <= 0 for c in cell):
            raise CalibrationError(f"cell sizes must be positive, got {cell}")
        if any(n < 1 for n in dims):
            raise CalibrationError(f"dims must each be >= 1, got {dims}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cell", cell)
        object.__setattr__(self, "dims", dims)

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def voxel_center(self, i: int, j: int, k: int) -> np.ndarray:
        x0, y0, z0 = self.origin
        dx, dy, dz = self.cell
        return np.array([x0 + i * dx, y0 + j * dy, z0 + k * dz])

    def centers(self) -> np.ndarray:
        """All voxel centers, shape (num_voxels, 3), in flat layout order."""
        x0, y0, z0 = self.origin
        dx, dy, dz = self.cell
        nx, ny, nz = self.dims
        ii, jj, kk = np.meshgrid(
            np.arange(nx, dtype=np.float64),
            np.arange(ny, dtype=np.float64),
            np.arange(nz, dtype=np.float64),
            indexing="ij",
        )
        out = np.empty((nx * ny * nz, 3))
        out[:, 0] = (x0 + ii * dx).reshape(-1)
        out[:, 1] = (y0 + jj * dy).reshape(-1)
        out[:, 2] = (z0 + kk * dz).reshape(-1)
        return out


def rigid_from_rt(r: np.ndarray, t: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = np.asarray(r, dtype=np.float64)
    m[:3, 3] = np.asarray(t, dtype=np.float64)
    return m


def invert_rigid(m: np.ndarray) -> np.ndarray:
    """Inverse of a homogeneous rigid transform without a general solve."""
    m = np.asarray(m, dtype=np.float64)
    rt = m[:3, :3].T
    out = np.eye(4)
    out[:3, :3] = rt
    out[:3, 3] = -rt @ m[:3, 3]
    return out


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compose two 4x4 homogeneous transforms (apply b first, then a)."""
    return np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64)


def project_to_feature_cells(
    calib: CameraCalibration,
    points: np.ndarray,
    feature_stride: int,
    near_clip: float = NEAR_CLIP_DEFAULT,
):
    """Project (N, 3) ego-frame points to integer feature-map cells.

    Returns ``(valid, u_f, v_f, depth)``; ``u_f``/``v_f`` are only
    meaningful where ``valid`` is set. The arithmetic is written as
    explicit elementwise expressions so scalar and batched calls round
    identically.
    """
    pts = np.asarray(points, dtype=np.float64)
    px, py, pz = pts[:, 0], pts[:, 1], pts[:, 2]
    e = calib.extrinsics.matrix
    cx = e[0, 0] * px + e[0, 1] * py + e[0, 2] * pz + e[0, 3]
    cy = e[1, 0] * px + e[1, 1] * py + e[1, 2] * pz + e[1, 3]
    cz = e[2, 0] * px + e[2, 1] * py + e[2, 2] * pz + e[2, 3]

    k = calib.intrinsics.k
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (k[0, 0] * cx + k[0, 1] * cy + k[0, 2] * cz) / cz
        v = (k[1, 0] * cx + k[1, 1] * cy + k[1, 2] * cz) / cz

    valid = (
        (cz > near_clip)
        & (u >= 0.0)
        & (u < calib.image_width)
        & (v >= 0.0)
        & (v < calib.image_height)
    )
    u_f = np.floor(np.where(valid, u, 0.0) / feature_stride).astype(np.int64)
    v_f = np.floor(np.where(valid, v, 0.0) / feature_stride).astype(np.int64)
    return valid, u_f, v_f, cz


def project_point(
    calib: CameraCalibration,
    p_ego,
    feature_stride: int,
    near_clip: float = NEAR_CLIP_DEFAULT,
):
    """Project a single ego-frame point; None when clipped or out of frame."""
    pts = np.asarray(p_ego, dtype=np.float64).reshape(1, 3)
    valid, u_f, v_f, depth = project_to_feature_cells(calib, pts, feature_stride, near_clip)
    if not valid[0]:
        return None
    return int(u_f[0]), int(v_f[0]), float(depth[0])


def relative_planar_pose(past: EgoPose, current: EgoPose) -> tuple[float, float, float]:
    """Planar (tx, ty, yaw) of the current-from-past transform.

    Roll and pitch of the relative pose are discarded: the BEV grid is a
    planar lattice with z folded into channels, so alignment is SE(2).
    Identical poses short-circuit to exact zeros.
    """
    if np.array_equal(past.matrix, current.matrix):
        return 0.0, 0.0, 0.0
    m = invert_rigid(current.matrix) @ past.matrix
    return float(m[0, 3]), float(m[1, 3]), math.atan2(m[1, 0], m[0, 0])
