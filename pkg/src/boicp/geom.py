"""Rigid transforms, the 6-vector pose parametrisation and pose errors.

A pose vector is a length-6 float array ``[x, y, z, roll, pitch, yaw]``
(metres, radians). Rotations compose as ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePoseError

TRANSLATION_AXES = (0, 1, 2)
ROTATION_AXES = (3, 4, 5)
POSE_LABELS = ("x", "y", "z", "roll", "pitch", "yaw")

_ORTHO_TOL = 1e-6


def as_pose(p) -> np.ndarray:
    """Validate and copy a pose vector."""
    p = np.array(p, dtype=float).reshape(-1)
    if p.shape != (6,):
        raise ValueError(f"pose vector must have 6 entries, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"pose vector has non-finite entries: {p}")
    return p


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Element of SE(3) acting as ``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("transform has non-finite entries")
        if np.abs(R.T @ R - np.eye(3)).max() > _ORTHO_TOL or np.linalg.det(R) < 0:
            raise ValueError("rotation is not a proper orthonormal matrix")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> RigidTransform:
        M = np.asarray(M, dtype=float)
        if M.shape not in ((4, 4), (3, 4)):
            raise ValueError(f"expected a 3x4 or 4x4 matrix, got {M.shape}")
        return cls(M[:3, :3], M[:3, 3])

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def apply(self, points) -> np.ndarray:
        """Transform an ``(n, 3)`` array (or a single 3-vector)."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def inverse(self) -> RigidTransform:
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def allclose(self, other: RigidTransform, atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"RigidTransform(\n{np.array2string(self.as_matrix(), precision=6)})"


@dataclass(frozen=True, eq=False)
class SearchBounds:
    """Axis-aligned box over (a subset of) the pose vector."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("bounds lo/hi must be non-empty and the same length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"bounds need lo < hi on every axis: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.dim == 6 and (np.any(lo[3:] < -np.pi - 1e-12) or np.any(hi[3:] > np.pi + 1e-12)):
            raise ValueError("rotation bounds must lie inside [-pi, pi]")

    @classmethod
    def default(cls) -> SearchBounds:
        """Translation box used on KITTI plus the whole rotation group."""
        return cls(
            [-4.0, -2.0, -1.0, -np.pi, -np.pi / 2, -np.pi],
            [4.0, 2.0, 1.0, np.pi, np.pi / 2, np.pi],
        )

    @classmethod
    def symmetric(cls, translation: float, rotation: float) -> SearchBounds:
        t, r = float(translation), float(rotation)
        return cls([-t, -t, -t, -r, -r, -r], [t, t, t, r, r, r])

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def subset(self, axes) -> SearchBounds:
        axes = list(axes)
        return SearchBounds(self.lo[axes], self.hi[axes])

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self.lo, self.hi)


def rotation_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    return rotation_z(yaw) @ rotation_y(pitch) @ rotation_x(roll)


def pose_to_transform(p) -> RigidTransform:
    p = as_pose(p)
    return RigidTransform(euler_to_rotation(p[3], p[4], p[5]), p[:3])


def transform_to_pose(T: RigidTransform) -> np.ndarray:
    """Inverse of :func:`pose_to_transform` away from gimbal lock.

    Raises
    ------
    DegeneratePoseError
        If ``|R[2, 0]| >= 1 - 1e-9`` (pitch at +-pi/2, roll and yaw coupled).
    """
    R = T.rotation
    if abs(R[2, 0]) >= 1.0 - 1e-9:
        raise DegeneratePoseError("pitch is at +-pi/2; roll and yaw are not separable")
    roll = np.arctan2(R[2, 1], R[2, 2])
    pitch = np.arctan2(-R[2, 0], np.hypot(R[0, 0], R[1, 0]))
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([*T.translation, roll, pitch, yaw])


def recenter_pose(p, base: RigidTransform) -> RigidTransform:
    """Interpret ``p`` as an increment expressed in the frame of ``base``."""
    return base.compose(pose_to_transform(p))


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in ``[0, pi]``."""
    # atan2 form of acos((tr - 1) / 2); stays accurate near 0 and pi
    cos_a = (np.trace(R) - 1.0) / 2.0
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_a = np.linalg.norm(skew) / 2.0
    return float(np.arctan2(sin_a, cos_a))


def rotation_error(A: RigidTransform, B: RigidTransform) -> float:
    return rotation_angle(A.rotation @ B.rotation.T)


def translation_error(A: RigidTransform, B: RigidTransform) -> float:
    return float(np.linalg.norm(A.translation - B.translation))


def quaternion_to_rotation(qx: float, qy: float, qz: float, qw: float) -> np.ndarray:
    """Rotation matrix of a unit quaternion (Hamilton convention, scalar last)."""
    x, y, z, w = qx, qy, qz, qw
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
