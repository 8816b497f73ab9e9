"""Pinhole camera model: intrinsics, rigid extrinsics and projective transforms.

Conventions used throughout the package:

* the rig frame is right-handed with x to the right, y forward and z up;
* a camera's viewing direction at zero yaw/pitch/roll is +y;
* yaw rotates the viewing direction about +z toward +x (so +90 degrees
  looks right), pitch tilts it toward +z, roll spins about the view axis;
* image coordinates put u along columns and v along rows, origin at the
  top-left corner, so v grows downward;
* angles are radians everywhere inside the library, degrees only at file
  and command-line boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Intrinsics",
    "Extrinsics",
    "EulerOffset",
    "euler_to_matrix",
    "focal_pixels",
    "world_to_camera",
    "project_to_image",
    "backproject_ray",
]


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsic parameters; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0
    f_mm: float = 1.0  # physical focal length, millimeters

    def __post_init__(self) -> None:
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not self.f_mm > 0.0:
            raise ValueError(f"physical focal length must be positive, got f_mm={self.f_mm}")
        for field in ("fx", "fy", "cx", "cy", "skew", "f_mm"):
            if not math.isfinite(getattr(self, field)):
                raise ValueError(f"intrinsic field {field} must be finite")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class Extrinsics:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if tr.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got {tr.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if not math.isclose(float(np.linalg.det(rot)), 1.0, abs_tol=1e-9):
            raise ValueError("rotation must be proper (determinant +1)")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    def inverse(self) -> "Extrinsics":
        """Camera-to-world transform."""
        return Extrinsics(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class EulerOffset:
    """Orientation offset as intrinsic yaw (about z-up), then pitch, then roll."""

    yaw: float
    pitch: float
    roll: float = 0.0

    def __post_init__(self) -> None:
        for field in ("yaw", "pitch", "roll"):
            if not math.isfinite(getattr(self, field)):
                raise ValueError(f"euler angle {field} must be finite")

    @classmethod
    def from_degrees(cls, yaw: float, pitch: float, roll: float = 0.0) -> "EulerOffset":
        return cls(math.radians(yaw), math.radians(pitch), math.radians(roll))

    def matrix(self) -> np.ndarray:
        return euler_to_matrix(self.yaw, self.pitch, self.roll)


def euler_to_matrix(yaw: float, pitch: float, roll: float = 0.0) -> np.ndarray:
    """Rotation matrix for intrinsic yaw -> pitch -> roll in the rig frame.

    Maps the reference viewing direction (0, 1, 0) to
    (cos(pitch)sin(yaw), cos(pitch)cos(yaw), sin(pitch)).
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    # yaw is compass-style (positive toward +x), hence the transposed z-rotation
    rz = np.array([[cy, sy, 0.0], [-sy, cy, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    ry = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    return rz @ rx @ ry


def focal_pixels(f_mm: float, pixel_size_mm: float) -> float:
    """Focal length in pixels from physical focal length and pixel pitch."""
    if not (f_mm > 0.0 and pixel_size_mm > 0.0):
        raise ValueError(
            f"focal length and pixel size must be positive, got f_mm={f_mm}, "
            f"pixel_size_mm={pixel_size_mm}"
        )
    return f_mm / pixel_size_mm


def world_to_camera(point: np.ndarray, extrinsics: Extrinsics) -> np.ndarray:
    """Transform a world-frame point into the camera frame."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"point must be a 3-vector, got shape {p.shape}")
    return extrinsics.rotation @ p + extrinsics.translation


def project_to_image(point_cam: np.ndarray, intrinsics: Intrinsics) -> tuple[float, float]:
    """Perspective projection of a camera-frame point to pixel coordinates.

    The camera frame here is the conventional projective one: x right,
    y down, z along the optical axis.  Points at or behind the camera
    plane are rejected.
    """
    p = np.asarray(point_cam, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"point must be a 3-vector, got shape {p.shape}")
    x, y, z = p
    if z <= 0.0:
        raise ValueError(f"point is behind the camera (z={z})")
    u = (intrinsics.fx * x + intrinsics.skew * y) / z + intrinsics.cx
    v = intrinsics.fy * y / z + intrinsics.cy
    return float(u), float(v)


def backproject_ray(pixel: tuple[float, float], intrinsics: Intrinsics) -> np.ndarray:
    """Unit direction in the camera frame whose projection is the given pixel."""
    u, v = pixel
    y = (v - intrinsics.cy) / intrinsics.fy
    x = (u - intrinsics.cx - intrinsics.skew * y) / intrinsics.fx
    d = np.array([x, y, 1.0])
    return d / np.linalg.norm(d)
