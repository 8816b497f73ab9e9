"""Synthetic assets: a six-camera demo rig, analytic scene renders and a
toy panorama/label dataset for training demos.

The demo scene paints a smooth trigonometric color field on the sphere of
view directions, so any camera image and the reference panorama can be
rendered analytically and compared against the stitching pipeline.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .camera import Intrinsics
from .sphere import AngularGrid, image_plane_distance
from .stitcher import CameraSpec, build_sphere_cameras, rig_origin

__all__ = [
    "demo_rig",
    "sphere_texture",
    "render_camera_views",
    "render_panorama_reference",
    "toy_dataset",
    "TOY_PANO_SHAPE",
]


def demo_rig(width: int = 1600, height: int = 1400, f_mm: float = 5.5) -> list[CameraSpec]:
    """Six-camera surround rig: 55-degree yaw spacing, wide rear camera.

    Focal lengths are set exactly to the image-plane distance implied by
    each camera's field of view, so projective and angular descriptions
    of a camera agree to machine precision.
    """
    layout = [
        ("cam_back", 1, 180.0, 110.0, (0.0, -1000.0, 1600.0)),
        ("cam_back_left", 2, -110.0, 70.0, (-500.0, -800.0, 1600.0)),
        ("cam_front_left", 3, -55.0, 70.0, (-500.0, 1300.0, 1600.0)),
        ("cam_front", 4, 0.0, 70.0, (0.0, 1500.0, 1600.0)),
        ("cam_front_right", 5, 55.0, 70.0, (500.0, 1300.0, 1600.0)),
        ("cam_back_right", 6, 110.0, 70.0, (500.0, -800.0, 1600.0)),
    ]
    cams = []
    for name, order, yaw_deg, fov_deg, translation in layout:
        fov = math.radians(fov_deg)
        focal = image_plane_distance(width, fov)
        cams.append(
            CameraSpec(
                name=name,
                order_index=order,
                yaw=math.radians(yaw_deg),
                pitch=0.0,
                roll=0.0,
                translation_mm=np.array(translation),
                intr=Intrinsics(
                    fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, skew=0.0, f_mm=f_mm
                ),
                width=width,
                height=height,
                fov=fov,
            )
        )
    return cams


def sphere_texture(directions: np.ndarray) -> np.ndarray:
    """Smooth color field over unit view directions; values in [0, 1].

    Shape (..., 3) in, (..., 3) out.  Low spatial frequency keeps the
    bilinear resampling error of rendered views far below one gray level.
    """
    d = np.asarray(directions, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    r = 0.5 + 0.35 * np.sin(2.0 * x + 1.0 * y) * np.cos(1.5 * z)
    g = 0.5 + 0.35 * np.sin(1.0 * y - 1.5 * z + 0.7) * np.cos(1.0 * x)
    b = 0.5 + 0.35 * np.cos(2.0 * z + 0.5 * x - 1.1 * y)
    return np.stack([r, g, b], axis=-1)


def render_camera_views(cameras: Sequence[CameraSpec]) -> dict[int, np.ndarray]:
    """Analytic 8-bit renders of the demo scene, keyed by order_index."""
    out: dict[int, np.ndarray] = {}
    for sph in build_sphere_cameras(cameras):
        spec = sph.spec
        us = (np.arange(spec.width) - spec.intr.cx) / sph.r_plane
        vs = (np.arange(spec.height) - spec.intr.cy) / sph.r_plane
        axis = sph.tangent / sph.radius
        dirs = (
            axis[None, None, :]
            + vs[:, None, None] * sph.basis_v[None, None, :]
            + us[None, :, None] * sph.basis_u[None, None, :]
        )
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        img = sphere_texture(dirs)
        out[spec.order_index] = np.rint(img * 255.0).astype(np.uint8)
    return out


def render_panorama_reference(
    height: int, width: int, v_half_fov: float = math.radians(25.0)
) -> np.ndarray:
    """Float reference panorama (H, W, 3) in [0, 1] from the analytic scene."""
    grid = AngularGrid(height=height, width=width, v_half_fov=v_half_fov)
    az = grid.azimuths()
    el = grid.elevations()
    dirs = np.empty((height, width, 3))
    dirs[..., 0] = np.cos(el)[:, None] * np.sin(az)[None, :]
    dirs[..., 1] = np.cos(el)[:, None] * np.cos(az)[None, :]
    dirs[..., 2] = np.sin(el)[:, None]
    return sphere_texture(dirs)


TOY_PANO_SHAPE = (32, 64)  # divisible by the encoder stride


def toy_dataset(
    n_samples: int,
    num_classes: int,
    out_h: int,
    out_w: int,
    seed: int = 0,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Panorama/label pairs where labels are readable from the panorama.

    Each panorama is split into num_classes equal azimuth stripes filled
    with a per-sample permutation of fixed stripe colors; the label map
    repeats the stripe's class across the matching vertical band of the
    output grid.  The mapping from pixels to classes is therefore exact
    and learnable at desk scale.
    """
    if out_w % num_classes:
        raise ValueError(
            f"output width {out_w} must be divisible by num_classes {num_classes}"
        )
    rng = np.random.default_rng(seed)
    h, w = TOY_PANO_SHAPE
    if w % num_classes:
        raise ValueError(
            f"panorama width {w} must be divisible by num_classes {num_classes}"
        )
    base = np.linspace(0.15, 0.85, num_classes)
    palette = np.stack(
        [base, np.roll(base, 1), base[::-1]], axis=1
    )  # distinct color per class
    stripe_w = w // num_classes
    band_w = out_w // num_classes
    data = []
    for _ in range(n_samples):
        perm = rng.permutation(num_classes)
        pano = np.empty((h, w, 3))
        label = np.empty((out_h, out_w), dtype=np.uint8)
        for s in range(num_classes):
            cls = int(perm[s])
            pano[:, s * stripe_w : (s + 1) * stripe_w] = palette[cls]
            label[:, s * band_w : (s + 1) * band_w] = cls
        pano += rng.normal(0.0, 0.01, size=pano.shape)  # mild texture noise
        data.append((np.clip(pano, 0.0, 1.0), label))
    return data
