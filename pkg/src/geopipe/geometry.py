"""Pinhole cameras, rigid poses and the frame-to-frame relative transform.

Poses are stored as (R, t) with an explicit convention flag. The canonical
convention is world-to-camera (``"w2c"``): a world point ``X`` maps to camera
coordinates ``R @ X + t``. Camera-to-world poses (``"c2w"``, as written by most
RGB-D capture tools) are accepted and converted by rigid inversion wherever a
projection is formed.

All 4x4 inverses use the block structure of the factors (rotation transpose,
upper-triangular intrinsics) instead of general elimination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

W2C = "w2c"
C2W = "c2w"
CONVENTIONS = (W2C, C2W)

ORTHONORMAL_TOL = 1e-9
DET_TOL = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateIntrinsicsError(GeometryError):
    pass


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.shape != shape:
        raise GeometryError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    """3x3 pinhole camera matrix in pixels.

    Invertibility is checked when a projection is formed, so that the error
    can name the frame that carries the bad matrix.
    """

    k: np.ndarray

    def __post_init__(self):
        k = _frozen(self.k, (3, 3))
        if abs(k[2, 2] - 1.0) > 1e-12:
            raise GeometryError(f"intrinsics k[2][2] must be 1, got {k[2, 2]!r}")
        object.__setattr__(self, "k", k)

    @classmethod
    def from_focal(cls, fx, fy, cx, cy, skew=0.0) -> "CameraIntrinsics":
        return cls(np.array([[fx, skew, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))

    @classmethod
    def identity(cls) -> "CameraIntrinsics":
        return cls(np.eye(3))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.k))

    def is_degenerate(self) -> bool:
        return abs(self.determinant) <= DET_TOL

    def inverse(self) -> np.ndarray:
        k = self.k
        if self.is_degenerate():
            raise DegenerateIntrinsicsError("degenerate intrinsics")
        if k[1, 0] == 0.0 and k[2, 0] == 0.0 and k[2, 1] == 0.0:
            a, b, c = k[0]
            d, e = k[1, 1], k[1, 2]
            return np.array(
                [
                    [1.0 / a, -b / (a * d), (b * e - c * d) / (a * d)],
                    [0.0, 1.0 / d, -e / d],
                    [0.0, 0.0, 1.0],
                ]
            )
        return np.linalg.inv(k)

    def normalized(self, width: float, height: float) -> "CameraIntrinsics":
        """Divide the first row by image width and the second by height."""
        if width <= 0 or height <= 0:
            raise GeometryError(f"image size must be positive, got {width}x{height}")
        return CameraIntrinsics(np.diag([1.0 / width, 1.0 / height, 1.0]) @ self.k)


@dataclass(frozen=True)
class RigidPose:
    r: np.ndarray
    t: np.ndarray
    convention: str = W2C

    def __post_init__(self):
        r = _frozen(self.r, (3, 3))
        t = _frozen(np.reshape(self.t, -1), (3,))
        if self.convention not in CONVENTIONS:
            raise GeometryError(f"unknown pose convention {self.convention!r}")
        drift = np.max(np.abs(r.T @ r - np.eye(3)))
        if drift >= ORTHONORMAL_TOL:
            raise GeometryError(f"rotation not orthonormal (max drift {drift:.3g})")
        if abs(np.linalg.det(r) - 1.0) >= ORTHONORMAL_TOL:
            raise GeometryError("rotation determinant is not +1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls, convention: str = W2C) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3), convention)

    @classmethod
    def from_matrix(cls, m, convention: str = W2C) -> "RigidPose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise GeometryError(f"pose matrix must be 4x4, got {m.shape}")
        if np.max(np.abs(m[3] - [0.0, 0.0, 0.0, 1.0])) > 1e-12:
            raise GeometryError("pose matrix bottom row must be (0, 0, 0, 1)")
        return cls(m[:3, :3], m[:3, 3], convention)

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.r
        m[:3, 3] = self.t
        return m

    def inverse_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.r.T
        m[:3, 3] = -self.r.T @ self.t
        return m

    def to_w2c(self) -> "RigidPose":
        if self.convention == W2C:
            return self
        inv = invert_pose(self)
        return RigidPose(inv.r, inv.t, W2C)

    def to_c2w(self) -> "RigidPose":
        if self.convention == C2W:
            return self
        inv = invert_pose(self)
        return RigidPose(inv.r, inv.t, C2W)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """Matrix product ``self @ other``; both must share a convention."""
        if self.convention != other.convention:
            raise GeometryError("cannot compose poses with different conventions")
        return RigidPose(self.r @ other.r, self.r @ other.t + self.t, self.convention)


def invert_pose(pose: RigidPose) -> RigidPose:
    """Rigid inverse. The convention flag is kept: the inverse of a w2c map is
    still handed back as a plain transform in the same slot."""
    return RigidPose(pose.r.T, -pose.r.T @ pose.t, pose.convention)


def camera_center(pose: RigidPose) -> np.ndarray:
    """Camera position in world coordinates (meters)."""
    if pose.convention == C2W:
        return pose.t.copy()
    return -pose.r.T @ pose.t


@dataclass(frozen=True)
class CalibratedFrame:
    frame_index: int
    intrinsics: CameraIntrinsics
    pose: RigidPose
    image_ref: Optional[str] = None
    image_size: Optional[Tuple[int, int]] = field(default=None)

    def __post_init__(self):
        if int(self.frame_index) != self.frame_index or self.frame_index < 0:
            raise GeometryError(f"frame_index must be a non-negative integer, got {self.frame_index!r}")
        object.__setattr__(self, "frame_index", int(self.frame_index))

    @property
    def center(self) -> np.ndarray:
        return camera_center(self.pose)

    @classmethod
    def reference(cls) -> "CalibratedFrame":
        """Identity-calibrated frame at the world origin."""
        return cls(0, CameraIntrinsics.identity(), RigidPose.identity())


def _effective_intrinsics(frame: CalibratedFrame, normalize: bool) -> CameraIntrinsics:
    if not normalize:
        return frame.intrinsics
    if frame.image_size is None:
        raise GeometryError(
            f"frame {frame.frame_index}: intrinsics normalization needs an image size"
        )
    w, h = frame.image_size
    return frame.intrinsics.normalized(w, h)


def _checked(frame: CalibratedFrame, normalize: bool) -> CameraIntrinsics:
    k = _effective_intrinsics(frame, normalize)
    if k.is_degenerate():
        raise DegenerateIntrinsicsError(
            f"degenerate intrinsics in frame {frame.frame_index} (det={k.determinant:.3g})"
        )
    return k


def _lift(k: np.ndarray) -> np.ndarray:
    out = np.eye(4)
    out[:3, :3] = k
    return out


def homogeneous_projection(frame: CalibratedFrame, normalize_intrinsics: bool = False) -> np.ndarray:
    """4x4 projection ``blockdiag(K, 1) @ T`` with ``T`` world-to-camera."""
    k = _checked(frame, normalize_intrinsics)
    return _lift(k.k) @ frame.pose.to_w2c().matrix


def projection_inverse(frame: CalibratedFrame, normalize_intrinsics: bool = False) -> np.ndarray:
    k = _checked(frame, normalize_intrinsics)
    return frame.pose.to_w2c().inverse_matrix() @ _lift(k.inverse())


def relative_transform(
    current: CalibratedFrame, previous: CalibratedFrame, normalize_intrinsics: bool = False
) -> np.ndarray:
    """Transform taking the previous frame's projection onto the current one.

    ``G = P_cur @ inv(P_prev)``; the pose part is formed first so that a common
    change of world frame cancels before the intrinsics are applied.
    """
    k_cur = _checked(current, normalize_intrinsics)
    k_prev = _checked(previous, normalize_intrinsics)
    rel = current.pose.to_w2c().matrix @ previous.pose.to_w2c().inverse_matrix()
    return _lift(k_cur.k) @ rel @ _lift(k_prev.inverse())


def first_frame_transform(first: CalibratedFrame, normalize_intrinsics: bool = False) -> np.ndarray:
    """Transform of the first frame against the identity reference camera."""
    return homogeneous_projection(first, normalize_intrinsics)


def relative_pose(current: CalibratedFrame, previous: CalibratedFrame) -> np.ndarray:
    """Rigid camera-to-camera transform ``T_cur @ inv(T_prev)`` (no intrinsics)."""
    return current.pose.to_w2c().matrix @ previous.pose.to_w2c().inverse_matrix()


def is_homogeneous(m: np.ndarray, tol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return (
        m.shape == (4, 4)
        and np.max(np.abs(m[3] - [0.0, 0.0, 0.0, 1.0])) <= tol
        and abs(np.linalg.det(m)) > DET_TOL
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
