"""Geometry-aware dataset generation: relative pose encoding, camera graphs,
instruction synthesis, triplet datasets, forward noising and attention scoring."""

from geopipe.geometry import (
    CalibratedFrame,
    CameraIntrinsics,
    RigidPose,
    camera_center,
    first_frame_transform,
    homogeneous_projection,
    invert_pose,
    relative_transform,
)
from geopipe.repe import (
    FrequencyConfig,
    encode_sequence,
    encode_transform,
    fuse,
    sinusoidal_encode,
)

__version__ = "0.1.0"

__all__ = [
    "CalibratedFrame",
    "CameraIntrinsics",
    "FrequencyConfig",
    "RigidPose",
    "camera_center",
    "encode_sequence",
    "encode_transform",
    "first_frame_transform",
    "fuse",
    "homogeneous_projection",
    "invert_pose",
    "relative_transform",
    "sinusoidal_encode",
]
