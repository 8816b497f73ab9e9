"""Label-set statistics: per-class pixel share and per-frame presence.

A class table is JSON with a "classes" list of {index, name, merged_into}
entries; merged_into is optional and names the index a class is folded
into.  Label rasters are (H, W) uint8 arrays whose values are class
indices, with 255 reserved for ignored pixels.  Ignored pixels never
count toward any numerator or denominator.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "IGNORE_INDEX",
    "ClassEntry",
    "ClassTable",
    "LabelRaster",
    "load_class_table",
    "validate_raster",
    "apply_class_merges",
    "pixel_ratio",
    "presence_ratio",
    "stats_report",
    "write_stats_csv",
]

IGNORE_INDEX = 255


@dataclass(frozen=True)
class ClassEntry:
    index: int
    name: str
    merged_into: Optional[int] = None


@dataclass(frozen=True)
class ClassTable:
    """Semantic class inventory with optional merge targets."""

    entries: tuple[ClassEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("class table must list at least one class")
        entries = tuple(self.entries)
        indices = [e.index for e in entries]
        if len(set(indices)) != len(indices):
            raise ValueError("class table has duplicate indices")
        by_index = {e.index: e for e in entries}
        for e in entries:
            if not (0 <= e.index < IGNORE_INDEX):
                raise ValueError(
                    f"class index {e.index} out of range [0, {IGNORE_INDEX})"
                )
            if e.merged_into is not None:
                target = by_index.get(e.merged_into)
                if target is None:
                    raise ValueError(
                        f"class {e.name!r} merges into unknown index {e.merged_into}"
                    )
                if target.merged_into is not None:
                    raise ValueError(
                        f"class {e.name!r} merges into {target.name!r}, which is itself merged"
                    )
                if e.merged_into == e.index:
                    raise ValueError(f"class {e.name!r} merges into itself")
        object.__setattr__(self, "entries", entries)

    @property
    def indices(self) -> list[int]:
        return [e.index for e in self.entries]

    def entry(self, index: int) -> ClassEntry:
        for e in self.entries:
            if e.index == index:
                return e
        raise KeyError(f"class index {index} not in table")

    def name(self, index: int) -> str:
        return self.entry(index).name

    def merge_lut(self) -> np.ndarray:
        """256-entry lookup mapping every index to its merge target."""
        lut = np.arange(256, dtype=np.uint8)
        for e in self.entries:
            if e.merged_into is not None:
                lut[e.index] = e.merged_into
        return lut


@dataclass(frozen=True)
class LabelRaster:
    """One labeled frame."""

    data: np.ndarray  # (H, W) uint8

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.dtype != np.uint8:
            raise ValueError(f"labels must be (H, W) uint8, got {arr.shape} {arr.dtype}")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def load_class_table(path: str | Path) -> ClassTable:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"class table {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("classes"), list):
        raise ValueError(f"class table {path} must contain a 'classes' list")
    entries = []
    for item in doc["classes"]:
        if "index" not in item or "name" not in item:
            raise ValueError(f"class table {path} entries need 'index' and 'name'")
        merged = item.get("merged_into")
        entries.append(
            ClassEntry(
                index=int(item["index"]),
                name=str(item["name"]),
                merged_into=None if merged is None else int(merged),
            )
        )
    return ClassTable(tuple(entries))


def _as_arrays(frames: Sequence) -> list[np.ndarray]:
    if len(frames) == 0:
        raise ValueError("need at least one frame")
    out = []
    for f in frames:
        arr = f.data if isinstance(f, LabelRaster) else np.asarray(f)
        if arr.ndim != 2 or arr.dtype != np.uint8:
            raise ValueError(f"labels must be (H, W) uint8, got {arr.shape} {arr.dtype}")
        out.append(arr)
    return out


def validate_raster(labels: np.ndarray | LabelRaster, table: ClassTable) -> None:
    """Reject rasters containing values that are neither classes nor ignore."""
    arr = labels.data if isinstance(labels, LabelRaster) else np.asarray(labels)
    known = np.zeros(256, dtype=bool)
    known[table.indices] = True
    known[IGNORE_INDEX] = True
    present = np.unique(arr)
    bad = [int(v) for v in present if not known[v]]
    if bad:
        raise ValueError(f"labels contain values outside the class table: {bad}")


def apply_class_merges(labels: np.ndarray | LabelRaster, table: ClassTable) -> np.ndarray:
    """Rewrite merged class indices to their targets; idempotent."""
    arr = labels.data if isinstance(labels, LabelRaster) else np.asarray(labels)
    validate_raster(arr, table)
    return table.merge_lut()[arr]


def pixel_ratio(frames: Sequence, class_id: int, table: ClassTable) -> float:
    """Share of a class among all counted (non-ignore) pixels across frames."""
    table.entry(class_id)  # raises KeyError for unknown classes
    arrays = _as_arrays(frames)
    hits = 0
    counted = 0
    for arr in arrays:
        validate_raster(arr, table)
        hits += int(np.count_nonzero(arr == class_id))
        counted += int(np.count_nonzero(arr != IGNORE_INDEX))
    if counted == 0:
        raise ValueError("all pixels are ignored; pixel ratio is undefined")
    return hits / counted


def presence_ratio(
    frames: Sequence, class_id: int, table: ClassTable, min_pixels: int = 2
) -> float:
    """Fraction of frames where the class occupies at least min_pixels pixels."""
    table.entry(class_id)
    if min_pixels < 1:
        raise ValueError(f"min_pixels must be at least 1, got {min_pixels}")
    arrays = _as_arrays(frames)
    present = 0
    for arr in arrays:
        validate_raster(arr, table)
        if int(np.count_nonzero(arr == class_id)) >= min_pixels:
            present += 1
    return present / len(arrays)


def stats_report(
    frames: Sequence, table: ClassTable, min_pixels: int = 2
) -> list[tuple[str, float, float]]:
    """(name, pixel_ratio, presence_ratio) per class, in table order."""
    return [
        (
            e.name,
            pixel_ratio(frames, e.index, table),
            presence_ratio(frames, e.index, table, min_pixels),
        )
        for e in table.entries
    ]


def write_stats_csv(path: str | Path, rows: Sequence[tuple[str, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "pixel_ratio", "presence_ratio"])
        for name, pix, pres in rows:
            writer.writerow([name, f"{pix:.6f}", f"{pres:.6f}"])
