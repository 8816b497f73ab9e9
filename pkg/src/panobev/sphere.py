"""View-sphere geometry relating panorama pixels to per-camera image pixels.

Each camera of a rig is modelled on a sphere around the rig's mean optical
center.  The sphere radius for a camera is the distance of its image plane
(in pixels, set by width and horizontal field of view) plus the pixel-scaled
horizontal offset of its optical center from the mean.  A panorama pixel
defines a view ray; the ray is intersected with the plane tangent to the
camera's sphere at the camera's viewing direction, and the in-plane
displacement of the hit point, rescaled back to the image plane, gives the
source pixel.  With all optical centers coincident this reduces exactly to
pinhole projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "AngularGrid",
    "ViewRay",
    "SphereCamera",
    "image_plane_distance",
    "center_offset_pixels",
    "sphere_radius",
    "tangent_point",
    "view_direction",
    "intersect_plane",
    "plane_basis",
    "panorama_to_camera_pixel",
]

# Rays closer than this to the tangent plane are treated as parallel.
_PARALLEL_EPS = 1e-9


@dataclass(frozen=True)
class AngularGrid:
    """Equirectangular pixel grid over azimuth and elevation.

    Azimuth spans the full horizontal field symmetrically with half-open
    pixel spacing (no column repeats the seam direction); elevation spans
    [+v_half_fov, -v_half_fov] inclusively so the top row sits exactly at
    +v_half_fov.  Row/column indices are 0-based.
    """

    height: int
    width: int
    h_half_fov: float = math.pi
    v_half_fov: float = math.radians(25.0)

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dims must be positive, got {self.height}x{self.width}")
        if not (0.0 < self.h_half_fov <= math.pi):
            raise ValueError(f"horizontal half fov out of range: {self.h_half_fov}")
        if not (0.0 < self.v_half_fov < math.pi / 2):
            raise ValueError(f"vertical half fov out of range: {self.v_half_fov}")

    def azimuths(self) -> np.ndarray:
        """Per-column azimuth deviation, shape (width,)."""
        k = np.arange(self.width, dtype=np.float64)
        return ((k + 0.5) / self.width - 0.5) * (2.0 * self.h_half_fov)

    def elevations(self) -> np.ndarray:
        """Per-row elevation deviation, shape (height,), top row first."""
        if self.height == 1:
            return np.zeros(1)
        j = np.arange(self.height, dtype=np.float64)
        return self.v_half_fov * (1.0 - 2.0 * j / (self.height - 1))

    def angular_deviation(self, j: int, k: int) -> tuple[float, float]:
        """(azimuth, elevation) of pixel at row j, column k."""
        if not (0 <= j < self.height and 0 <= k < self.width):
            raise IndexError(
                f"pixel ({j}, {k}) outside grid {self.height}x{self.width}"
            )
        du = ((k + 0.5) / self.width - 0.5) * (2.0 * self.h_half_fov)
        if self.height == 1:
            dv = 0.0
        else:
            dv = self.v_half_fov * (1.0 - 2.0 * j / (self.height - 1))
        return du, dv


@dataclass(frozen=True)
class ViewRay:
    """Unit direction in the rig frame (x right, y forward, z up)."""

    alpha: float  # x component
    beta: float  # y component
    gamma: float  # z component

    def __post_init__(self) -> None:
        n = math.sqrt(self.alpha**2 + self.beta**2 + self.gamma**2)
        if not math.isclose(n, 1.0, abs_tol=1e-9):
            raise ValueError(f"view ray must be unit length, got norm {n}")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])


@dataclass(frozen=True)
class SphereCamera:
    """Per-camera sphere geometry derived from a rig entry.

    spec is the originating camera description; it must expose width,
    height and an intr with cx/cy.  tangent has length radius and the
    basis vectors are the unit in-plane axes (u along image columns,
    v along image rows).
    """

    spec: object
    r_plane: float
    delta: float
    radius: float
    tangent: np.ndarray  # (3,)
    basis_u: np.ndarray  # (3,) unit
    basis_v: np.ndarray  # (3,) unit

    def __post_init__(self) -> None:
        if not self.r_plane > 0.0:
            raise ValueError(f"image plane distance must be positive, got {self.r_plane}")
        if self.delta < 0.0:
            raise ValueError(f"center offset must be non-negative, got {self.delta}")
        if not math.isclose(self.radius, self.r_plane + self.delta, rel_tol=1e-12):
            raise ValueError("sphere radius must equal plane distance plus center offset")
        tangent = np.asarray(self.tangent, dtype=np.float64)
        bu = np.asarray(self.basis_u, dtype=np.float64)
        bv = np.asarray(self.basis_v, dtype=np.float64)
        if not math.isclose(float(np.linalg.norm(tangent)), self.radius, rel_tol=1e-9):
            raise ValueError("tangent point must lie on the sphere")
        for name, vec in (("basis_u", bu), ("basis_v", bv)):
            if not math.isclose(float(np.linalg.norm(vec)), 1.0, abs_tol=1e-9):
                raise ValueError(f"{name} must be unit length")
        if abs(float(bu @ bv)) > 1e-9 or abs(float(tangent @ bu)) > 1e-6 * self.radius:
            raise ValueError("plane basis must be orthogonal to itself and the tangent")
        object.__setattr__(self, "tangent", tangent)
        object.__setattr__(self, "basis_u", bu)
        object.__setattr__(self, "basis_v", bv)


def image_plane_distance(width_px: int, fov: float) -> float:
    """Distance of the image plane in pixels: (width/2) / tan(fov/2)."""
    if width_px < 1:
        raise ValueError(f"image width must be positive, got {width_px}")
    if not (0.0 < fov < math.pi):
        raise ValueError(f"horizontal fov must lie in (0, pi), got {fov}")
    return (width_px / 2.0) / math.tan(fov / 2.0)


def center_offset_pixels(offset_mm: np.ndarray, fx: float, fy: float, f_mm: float) -> float:
    """Pixel-scaled magnitude of a horizontal optical-center offset.

    offset_mm holds the (x, y) displacement of the camera's optical center
    from the rig's mean optical center, in millimeters.
    """
    off = np.asarray(offset_mm, dtype=np.float64)
    if off.shape != (2,):
        raise ValueError(f"offset must be an (x, y) pair, got shape {off.shape}")
    if not (fx > 0.0 and fy > 0.0 and f_mm > 0.0):
        raise ValueError("focal lengths must be positive")
    du = off[0] * fx / f_mm
    dv = off[1] * fy / f_mm
    return float(math.hypot(du, dv))


def sphere_radius(r_plane: float, delta: float) -> float:
    """Per-camera sphere radius: image plane distance plus center offset."""
    if not r_plane > 0.0:
        raise ValueError(f"image plane distance must be positive, got {r_plane}")
    if delta < 0.0:
        raise ValueError(f"center offset must be non-negative, got {delta}")
    return r_plane + delta


def tangent_point(radius: float, yaw: float, pitch: float) -> np.ndarray:
    """Point where the camera's viewing direction touches its sphere."""
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    cp = math.cos(pitch)
    return radius * np.array([cp * math.sin(yaw), cp * math.cos(yaw), math.sin(pitch)])


def view_direction(du: float, dv: float) -> ViewRay:
    """Unit ray for angular deviations (azimuth du, elevation dv)."""
    cv = math.cos(dv)
    return ViewRay(cv * math.sin(du), cv * math.cos(du), math.sin(dv))


def intersect_plane(tangent: np.ndarray, ray: np.ndarray, radius: float) -> Optional[np.ndarray]:
    """Intersection of a view ray with the plane tangent to the sphere.

    The plane touches the sphere of the given radius at the tangent point
    and is perpendicular to it, so a ray d from the center hits it at
    t = radius^2 / (tangent . d).  Returns None when the ray is parallel
    to the plane or points away from it.
    """
    t_vec = np.asarray(tangent, dtype=np.float64)
    d = ray.as_array() if isinstance(ray, ViewRay) else np.asarray(ray, dtype=np.float64)
    denom = float(t_vec @ d)
    if denom <= _PARALLEL_EPS * radius:
        return None
    return (radius * radius / denom) * d


def plane_basis(tangent: np.ndarray, yaw: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit in-plane axes of the tangent plane: u along columns, v along rows.

    u is horizontal (perpendicular to the viewing azimuth); v completes a
    basis pointing down in image space, so v = normalize(tangent x u).
    """
    t_vec = np.asarray(tangent, dtype=np.float64)
    if float(np.linalg.norm(t_vec)) <= 0.0:
        raise ValueError("tangent point must be non-zero")
    u = np.array([math.cos(yaw), -math.sin(yaw), 0.0])
    v = np.cross(t_vec, u)
    n = float(np.linalg.norm(v))
    if n <= 0.0:
        raise ValueError("degenerate tangent; cannot build plane basis")
    return u, v / n


def panorama_to_camera_pixel(cam: SphereCamera, ray: ViewRay) -> Optional[tuple[float, float]]:
    """Source pixel of a view ray in the camera image, or None when outside.

    The in-plane displacement of the tangent-plane hit point is rescaled by
    r_plane/radius so that a camera with zero center offset reproduces the
    plain pinhole projection.  A pixel is valid when it falls inside
    [0, width) x [0, height).
    """
    hit = intersect_plane(cam.tangent, ray, cam.radius)
    if hit is None:
        return None
    disp = hit - cam.tangent
    s_u = float(disp @ cam.basis_u)
    s_v = float(disp @ cam.basis_v)
    scale = cam.r_plane / cam.radius
    u = cam.spec.intr.cx + s_u * scale
    v = cam.spec.intr.cy + s_v * scale
    if 0.0 <= u < cam.spec.width and 0.0 <= v < cam.spec.height:
        return u, v
    return None
