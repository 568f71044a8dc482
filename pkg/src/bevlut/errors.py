"""Error classes shared across the package.

Every error the CLI can surface has a distinct class so exit diagnostics
carry a stable name.
"""


class BevlutError(Exception):
    """Base class for all package errors."""


class CalibrationError(BevlutError):
    """Malformed intrinsics/extrinsics/pose at construction time."""


class RigConfigError(BevlutError):
    """Inconsistent camera rig configuration (mixed image dims, bad stride,
    priority list not a permutation of the rig)."""


class DimensionMismatchError(BevlutError):
    """Tensor dims disagree with the LUT or with each other."""


class DecodeError(BevlutError):
    """Base for binary stream decode failures."""


class BadMagicError(DecodeError):
    pass


class UnsupportedVersionError(DecodeError):
    pass


class TruncatedStreamError(DecodeError):
    pass


class EntryRangeError(DecodeError):
    """LUT entry outside [0, num_cameras * H_f * W_f)."""


class RankError(DecodeError):
    """Tensor rank outside the supported range."""


class DimsOverflowError(DecodeError):
    """Tensor dim product exceeds the 2**31 element limit."""


class CalibrationParseError(BevlutError):
    """Calibration record file violates the documented schema."""


class UnknownPresetError(BevlutError):
    pass


class EquivalenceError(BevlutError):
    """Dense and baseline paths disagree; benchmark refuses to time."""
