"""Thin PNG helpers: 8-bit RGB images and single-channel label rasters."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["read_rgb", "write_rgb", "read_label", "write_label"]


def read_rgb(path: str | Path) -> np.ndarray:
    """Load an image as (H, W, 3) uint8."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_rgb(path: str | Path, image: np.ndarray) -> None:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {arr.shape} {arr.dtype}")
    Image.fromarray(arr, mode="RGB").save(path)


def read_label(path: str | Path) -> np.ndarray:
    """Load a single-channel 8-bit label raster as (H, W) uint8."""
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(
                f"label raster {path} must be single-channel 8-bit, got mode {img.mode!r}"
            )
        return np.asarray(img, dtype=np.uint8)


def write_label(path: str | Path, labels: np.ndarray) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"expected (H, W) uint8 labels, got {arr.shape} {arr.dtype}")
    Image.fromarray(arr, mode="L").save(path)
