"""Rig description, panorama remap table construction and image stitching.

A rig file is JSON with a top-level "cameras" list.  Every camera entry
carries: name, order_index, yaw_deg, pitch_deg, roll_deg, translation_mm
(x, y, z), fx_px, fy_px, cx_px, cy_px, skew, f_mm, width_px, height_px,
fov_deg.  skew defaults to 0 when absent; roll must be 0.

The remap table assigns each panorama pixel a source camera id (the
camera's order_index, -1 when no camera sees the ray) plus sub-pixel
source coordinates.  Binary layout: magic "OBRM", then version, height
and width as little-endian u32, then height*width row-major records of
{camera_id: i16, src_u: f32, src_v: f32}, all little-endian.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .camera import Intrinsics
from .sphere import (
    AngularGrid,
    SphereCamera,
    center_offset_pixels,
    image_plane_distance,
    plane_basis,
    sphere_radius,
    tangent_point,
)

__all__ = [
    "CameraSpec",
    "RemapTable",
    "load_rig",
    "save_rig",
    "rig_origin",
    "build_sphere_camera",
    "build_sphere_cameras",
    "build_remap_table",
    "save_remap",
    "load_remap",
    "stitch",
    "seam_mask",
]

REMAP_MAGIC = b"OBRM"
REMAP_VERSION = 1
INVALID_CAMERA = -1

_RECORD_DTYPE = np.dtype([("camera_id", "<i2"), ("src_u", "<f4"), ("src_v", "<f4")])

_RIG_FIELDS = (
    "name",
    "order_index",
    "yaw_deg",
    "pitch_deg",
    "roll_deg",
    "translation_mm",
    "fx_px",
    "fy_px",
    "cx_px",
    "cy_px",
    "f_mm",
    "width_px",
    "height_px",
    "fov_deg",
)


@dataclass(frozen=True)
class CameraSpec:
    """One rig camera: pose offsets (radians), position (mm) and intrinsics."""

    name: str
    order_index: int
    yaw: float
    pitch: float
    roll: float
    translation_mm: np.ndarray  # (3,)
    intr: Intrinsics
    width: int
    height: int
    fov: float  # horizontal, radians

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("camera name must be non-empty")
        tr = np.asarray(self.translation_mm, dtype=np.float64)
        if tr.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got shape {tr.shape}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"camera dims must be positive, got {self.width}x{self.height}")
        if not (0.0 < self.fov < math.pi):
            raise ValueError(f"horizontal fov must lie in (0, pi), got {self.fov}")
        if not math.isclose(self.roll, 0.0, abs_tol=1e-12):
            raise ValueError(
                f"camera {self.name!r} has non-zero roll; rolled cameras are not supported"
            )
        object.__setattr__(self, "translation_mm", tr)


def load_rig(path: str | Path) -> list[CameraSpec]:
    """Parse and validate a rig file; cameras come back sorted by order_index."""
    raw = Path(path).read_text()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"rig file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cameras"), list):
        raise ValueError(f"rig file {path} must contain a 'cameras' list")
    if not doc["cameras"]:
        raise ValueError(f"rig file {path} lists no cameras")
    cams = []
    for entry in doc["cameras"]:
        missing = [f for f in _RIG_FIELDS if f not in entry]
        if missing:
            raise ValueError(
                f"rig camera {entry.get('name', '?')!r} is missing fields: {', '.join(missing)}"
            )
        intr = Intrinsics(
            fx=float(entry["fx_px"]),
            fy=float(entry["fy_px"]),
            cx=float(entry["cx_px"]),
            cy=float(entry["cy_px"]),
            skew=float(entry.get("skew", 0.0)),
            f_mm=float(entry["f_mm"]),
        )
        cams.append(
            CameraSpec(
                name=str(entry["name"]),
                order_index=int(entry["order_index"]),
                yaw=math.radians(float(entry["yaw_deg"])),
                pitch=math.radians(float(entry["pitch_deg"])),
                roll=math.radians(float(entry["roll_deg"])),
                translation_mm=np.asarray(entry["translation_mm"], dtype=np.float64),
                intr=intr,
                width=int(entry["width_px"]),
                height=int(entry["height_px"]),
                fov=math.radians(float(entry["fov_deg"])),
            )
        )
    indices = [c.order_index for c in cams]
    if len(set(indices)) != len(indices):
        raise ValueError(f"rig file {path} has duplicate order_index values")
    names = [c.name for c in cams]
    if len(set(names)) != len(names):
        raise ValueError(f"rig file {path} has duplicate camera names")
    return sorted(cams, key=lambda c: c.order_index)


def save_rig(path: str | Path, cameras: Sequence[CameraSpec]) -> None:
    """Write a rig file readable by load_rig."""
    doc = {
        "cameras": [
            {
                "name": c.name,
                "order_index": c.order_index,
                "yaw_deg": math.degrees(c.yaw),
                "pitch_deg": math.degrees(c.pitch),
                "roll_deg": math.degrees(c.roll),
                "translation_mm": list(map(float, c.translation_mm)),
                "fx_px": c.intr.fx,
                "fy_px": c.intr.fy,
                "cx_px": c.intr.cx,
                "cy_px": c.intr.cy,
                "skew": c.intr.skew,
                "f_mm": c.intr.f_mm,
                "width_px": c.width,
                "height_px": c.height,
                "fov_deg": math.degrees(c.fov),
            }
            for c in cameras
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def rig_origin(cameras: Sequence[CameraSpec]) -> np.ndarray:
    """Mean optical center of the rig, millimeters."""
    if not cameras:
        raise ValueError("rig has no cameras")
    return np.mean([c.translation_mm for c in cameras], axis=0)


def build_sphere_camera(spec: CameraSpec, origin_mm: np.ndarray) -> SphereCamera:
    """Sphere geometry for one camera given the rig's mean optical center."""
    r_plane = image_plane_distance(spec.width, spec.fov)
    offset = spec.translation_mm[:2] - np.asarray(origin_mm, dtype=np.float64)[:2]
    delta = center_offset_pixels(offset, spec.intr.fx, spec.intr.fy, spec.intr.f_mm)
    radius = sphere_radius(r_plane, delta)
    tangent = tangent_point(radius, spec.yaw, spec.pitch)
    basis_u, basis_v = plane_basis(tangent, spec.yaw)
    return SphereCamera(
        spec=spec,
        r_plane=r_plane,
        delta=delta,
        radius=radius,
        tangent=tangent,
        basis_u=basis_u,
        basis_v=basis_v,
    )


def build_sphere_cameras(cameras: Sequence[CameraSpec]) -> list[SphereCamera]:
    origin = rig_origin(cameras)
    return [build_sphere_camera(c, origin) for c in cameras]


@dataclass
class RemapTable:
    """Per-pixel source camera and sub-pixel source coordinates."""

    camera_id: np.ndarray  # (H, W) int16, INVALID_CAMERA where unresolved
    src_u: np.ndarray  # (H, W) float32
    src_v: np.ndarray  # (H, W) float32

    def __post_init__(self) -> None:
        if self.camera_id.shape != self.src_u.shape or self.src_u.shape != self.src_v.shape:
            raise ValueError("remap planes must share one shape")
        if self.camera_id.ndim != 2:
            raise ValueError("remap planes must be 2-d")

    @property
    def height(self) -> int:
        return self.camera_id.shape[0]

    @property
    def width(self) -> int:
        return self.camera_id.shape[1]


def _row_chunks(height: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, height))
    step = -(-height // jobs)
    return [(start, min(start + step, height)) for start in range(0, height, step)]


def _project_rows(
    sph_cams: Sequence[SphereCamera],
    azimuths: np.ndarray,
    elevations: np.ndarray,
    policy: str,
    out_id: np.ndarray,
    out_u: np.ndarray,
    out_v: np.ndarray,
) -> None:
    """Fill remap planes for a block of rows (elevations) in place."""
    n_rows, n_cols = elevations.size, azimuths.size
    sin_az, cos_az = np.sin(azimuths), np.cos(azimuths)
    sin_el, cos_el = np.sin(elevations), np.cos(elevations)
    dx = cos_el[:, None] * sin_az[None, :]
    dy = cos_el[:, None] * cos_az[None, :]
    dz = np.broadcast_to(sin_el[:, None], (n_rows, n_cols))

    best_score = np.full((n_rows, n_cols), -np.inf)
    for cam in sph_cams:
        tx, ty, tz = cam.tangent
        denom = tx * dx + ty * dy + tz * dz  # tangent . ray
        front = denom > _front_eps(cam.radius)
        safe = np.where(front, denom, 1.0)
        t = cam.radius * cam.radius / safe
        # displacement of the hit point from the tangent point, in-plane
        s_u = t * (dx * cam.basis_u[0] + dy * cam.basis_u[1] + dz * cam.basis_u[2]) - float(
            cam.tangent @ cam.basis_u
        )
        s_v = t * (dx * cam.basis_v[0] + dy * cam.basis_v[1] + dz * cam.basis_v[2]) - float(
            cam.tangent @ cam.basis_v
        )
        scale = cam.r_plane / cam.radius
        u = cam.spec.intr.cx + s_u * scale
        v = cam.spec.intr.cy + s_v * scale
        valid = front & (u >= 0.0) & (u < cam.spec.width) & (v >= 0.0) & (v < cam.spec.height)
        if policy == "nearest":
            # cosine of the angle between ray and viewing direction; strict >
            # keeps the first (lowest order_index) camera on exact ties
            score = denom / cam.radius
        else:
            score = np.full_like(denom, float(cam.spec.order_index))
        take = valid & (score > best_score)
        best_score[take] = score[take]
        out_id[take] = np.int16(cam.spec.order_index)
        out_u[take] = u[take]
        out_v[take] = v[take]


def _front_eps(radius: float) -> float:
    return 1e-9 * radius


def build_remap_table(
    cameras: Sequence[CameraSpec],
    height: int,
    width: int,
    v_half_fov: float = math.radians(25.0),
    policy: str = "nearest",
    jobs: int = 1,
) -> RemapTable:
    """Resolve every panorama pixel to its best source camera and pixel.

    policy "nearest" picks, among cameras whose image contains the ray,
    the one whose viewing direction is angularly closest to the ray (ties
    go to the lowest order_index); policy "order" replays the cameras in
    order_index order and lets later cameras overwrite earlier ones.
    """
    if policy not in ("nearest", "order"):
        raise ValueError(f"unknown overlap policy {policy!r}")
    if not cameras:
        raise ValueError("rig has no cameras")
    cameras = sorted(cameras, key=lambda c: c.order_index)
    grid = AngularGrid(height=height, width=width, v_half_fov=v_half_fov)
    sph_cams = build_sphere_cameras(cameras)

    camera_id = np.full((height, width), INVALID_CAMERA, dtype=np.int16)
    src_u = np.zeros((height, width), dtype=np.float32)
    src_v = np.zeros((height, width), dtype=np.float32)

    azimuths = grid.azimuths()
    elevations = grid.elevations()

    def work(rows: tuple[int, int]) -> None:
        r0, r1 = rows
        fid = np.full((r1 - r0, width), INVALID_CAMERA, dtype=np.int16)
        fu = np.zeros((r1 - r0, width), dtype=np.float64)
        fv = np.zeros((r1 - r0, width), dtype=np.float64)
        _project_rows(sph_cams, azimuths, elevations[r0:r1], policy, fid, fu, fv)
        camera_id[r0:r1] = fid
        src_u[r0:r1] = fu.astype(np.float32)
        src_v[r0:r1] = fv.astype(np.float32)
        # invalid entries keep zeroed coordinates for byte-stable output
        src_u[r0:r1][fid == INVALID_CAMERA] = 0.0
        src_v[r0:r1][fid == INVALID_CAMERA] = 0.0

    chunks = _row_chunks(height, jobs)
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return RemapTable(camera_id=camera_id, src_u=src_u, src_v=src_v)


def save_remap(path: str | Path, table: RemapTable) -> None:
    """Serialize a remap table to the binary record format."""
    records = np.empty(table.height * table.width, dtype=_RECORD_DTYPE)
    records["camera_id"] = table.camera_id.reshape(-1)
    records["src_u"] = table.src_u.reshape(-1)
    records["src_v"] = table.src_v.reshape(-1)
    header = REMAP_MAGIC + struct.pack("<III", REMAP_VERSION, table.height, table.width)
    Path(path).write_bytes(header + records.tobytes())


def load_remap(path: str | Path) -> RemapTable:
    """Read a remap table, validating magic, version and record count."""
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise ValueError(f"remap file {path} is truncated (no header)")
    if blob[:4] != REMAP_MAGIC:
        raise ValueError(f"remap file {path} has bad magic {blob[:4]!r}")
    version, height, width = struct.unpack("<III", blob[4:16])
    if version != REMAP_VERSION:
        raise ValueError(f"remap file {path} has unsupported version {version}")
    expect = 16 + height * width * _RECORD_DTYPE.itemsize
    if len(blob) != expect:
        raise ValueError(
            f"remap file {path} has wrong size: expected {expect} bytes, got {len(blob)}"
        )
    records = np.frombuffer(blob[16:], dtype=_RECORD_DTYPE)
    return RemapTable(
        camera_id=records["camera_id"].reshape(height, width).copy(),
        src_u=records["src_u"].reshape(height, width).copy(),
        src_v=records["src_v"].reshape(height, width).copy(),
    )


def _bilinear_u8(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear samples of an (H, W, C) uint8 image at sub-pixel coords."""
    h, w = image.shape[:2]
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = (u - x0)[:, None]
    fy = (v - y0)[:, None]
    x0 = np.clip(x0, 0, w - 1)
    y0 = np.clip(y0, 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    img = image.astype(np.float64)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def stitch(
    images: Mapping[int, np.ndarray],
    table: RemapTable,
    jobs: int = 1,
) -> np.ndarray:
    """Assemble the panorama by sampling each source camera bilinearly.

    images maps camera order_index to an (H, W, 3) uint8 array.  Pixels
    without a source camera come out black.
    """
    present = set(np.unique(table.camera_id[table.camera_id != INVALID_CAMERA]).tolist())
    missing = sorted(present - set(images))
    if missing:
        raise ValueError(f"missing images for camera ids: {missing}")
    out = np.zeros((table.height, table.width, 3), dtype=np.uint8)

    def work(rows: tuple[int, int]) -> None:
        r0, r1 = rows
        ids = table.camera_id[r0:r1]
        us = table.src_u[r0:r1].astype(np.float64)
        vs = table.src_v[r0:r1].astype(np.float64)
        block = np.zeros((r1 - r0, table.width, 3), dtype=np.uint8)
        for cam_id in np.unique(ids):
            if cam_id == INVALID_CAMERA:
                continue
            mask = ids == cam_id
            vals = _bilinear_u8(images[int(cam_id)], us[mask], vs[mask])
            block[mask] = np.rint(vals).astype(np.uint8)
        out[r0:r1] = block

    chunks = _row_chunks(table.height, jobs)
    if len(chunks) == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(work, chunks))
    return out


def seam_mask(table: RemapTable, band: int = 3) -> np.ndarray:
    """Boolean mask of pixels within `band` pixels of a camera-id change.

    Azimuth wraps, so adjacency is circular along rows.
    """
    ids = table.camera_id
    edge = np.zeros(ids.shape, dtype=bool)
    diff_h = ids != np.roll(ids, -1, axis=1)
    edge |= diff_h | np.roll(diff_h, 1, axis=1)
    diff_v = ids[:-1, :] != ids[1:, :]
    edge[:-1][diff_v] = True
    edge[1:][diff_v] = True
    mask = edge.copy()
    for _ in range(band - 1):
        grown = mask.copy()
        grown |= np.roll(mask, 1, axis=1) | np.roll(mask, -1, axis=1)
        grown[1:] |= mask[:-1]
        grown[:-1] |= mask[1:]
        mask = grown
    return mask
