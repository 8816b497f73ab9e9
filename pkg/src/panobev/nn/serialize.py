"""Binary tensor serialization and named-parameter checkpoints.

Tensor format: rank as little-endian u32, each dimension as u32, then the
row-major float64 payload, little-endian.  A checkpoint is a directory
holding one .bin per parameter plus manifest.json listing tensor names
(with their files) and an arbitrary config mapping.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tensor

__all__ = ["save_tensor", "load_tensor", "save_checkpoint", "load_checkpoint"]

_MAX_RANK = 255


def save_tensor(path: str | Path, array: np.ndarray | Tensor) -> None:
    arr = array.data if isinstance(array, Tensor) else np.asarray(array)
    # asarray keeps 0-d arrays 0-d; tobytes() below emits row-major bytes
    # for any memory layout
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim > _MAX_RANK:
        raise ValueError(f"rank {arr.ndim} too large")
    header = struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype("<f8").tobytes()
    Path(path).write_bytes(header + payload)


def load_tensor(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise ValueError(f"tensor file {path} is truncated (no rank)")
    (rank,) = struct.unpack("<I", blob[:4])
    if rank > _MAX_RANK:
        raise ValueError(f"tensor file {path} declares absurd rank {rank}")
    need = 4 + 4 * rank
    if len(blob) < need:
        raise ValueError(f"tensor file {path} is truncated (incomplete shape)")
    shape = struct.unpack(f"<{rank}I", blob[4:need])
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    expect = need + 8 * count
    if len(blob) != expect:
        raise ValueError(
            f"tensor file {path} has wrong payload size: expected {expect} bytes, "
            f"got {len(blob)}"
        )
    data = np.frombuffer(blob[need:], dtype="<f8").astype(np.float64)
    return data.reshape(shape)


def save_checkpoint(
    directory: str | Path,
    params: Mapping[str, Tensor | np.ndarray],
    config: Mapping | None = None,
) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"tensors": [], "config": dict(config or {})}
    for i, (name, tensor) in enumerate(sorted(params.items())):
        fname = f"t{i:04d}.bin"
        save_tensor(out / fname, tensor)
        manifest["tensors"].append({"name": name, "file": fname})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_checkpoint(directory: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    root = Path(directory)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"checkpoint {directory} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    if "tensors" not in manifest:
        raise ValueError(f"checkpoint manifest {manifest_path} lists no tensors")
    params = {}
    for item in manifest["tensors"]:
        params[item["name"]] = load_tensor(root / item["file"])
    return params, manifest.get("config", {})
