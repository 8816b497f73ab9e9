"""Segmentation quality metrics: per-class IoU and their unweighted mean.

Positions labeled 255 in either the prediction or the reference are
excluded before counting, which keeps IoU symmetric in its arguments.
A class with an empty union has no defined IoU and is skipped by the
mean rather than counted as zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .stats import IGNORE_INDEX

__all__ = ["ConfusionAccumulator", "iou", "miou", "write_iou_csv"]


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred)
    g = np.asarray(gt)
    if p.shape != g.shape:
        raise ValueError(f"prediction and reference shapes differ: {p.shape} vs {g.shape}")
    keep = (p != IGNORE_INDEX) & (g != IGNORE_INDEX)
    return p[keep], g[keep]


@dataclass
class ConfusionAccumulator:
    """Streaming intersection/union/support counts over a fixed class list."""

    class_ids: tuple[int, ...]
    intersection: np.ndarray = field(default=None)  # type: ignore[assignment]
    union: np.ndarray = field(default=None)  # type: ignore[assignment]
    support: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        ids = tuple(int(c) for c in self.class_ids)
        if not ids:
            raise ValueError("accumulator needs at least one class")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate class ids")
        if any(c == IGNORE_INDEX for c in ids):
            raise ValueError(f"class id {IGNORE_INDEX} is reserved for ignored pixels")
        self.class_ids = ids
        n = len(ids)
        if self.intersection is None:
            self.intersection = np.zeros(n, dtype=np.int64)
            self.union = np.zeros(n, dtype=np.int64)
            self.support = np.zeros(n, dtype=np.int64)
        for name in ("intersection", "union", "support"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")

    def add(self, pred: np.ndarray, gt: np.ndarray) -> None:
        p, g = _check_pair(pred, gt)
        for i, c in enumerate(self.class_ids):
            pm = p == c
            gm = g == c
            self.intersection[i] += int(np.count_nonzero(pm & gm))
            self.union[i] += int(np.count_nonzero(pm | gm))
            self.support[i] += int(np.count_nonzero(gm))

    def merge(self, other: "ConfusionAccumulator") -> "ConfusionAccumulator":
        if other.class_ids != self.class_ids:
            raise ValueError("cannot merge accumulators over different class lists")
        return ConfusionAccumulator(
            class_ids=self.class_ids,
            intersection=self.intersection + other.intersection,
            union=self.union + other.union,
            support=self.support + other.support,
        )

    def iou_per_class(self) -> dict[int, Optional[float]]:
        """IoU by class id; None where the union is empty."""
        out: dict[int, Optional[float]] = {}
        for i, c in enumerate(self.class_ids):
            u = int(self.union[i])
            out[c] = None if u == 0 else float(self.intersection[i]) / u
        return out


def iou(pred: np.ndarray, gt: np.ndarray, class_id: int) -> Optional[float]:
    """Single-pair IoU for one class, None when the class is absent from both."""
    p, g = _check_pair(pred, gt)
    pm = p == class_id
    gm = g == class_id
    union = int(np.count_nonzero(pm | gm))
    if union == 0:
        return None
    return float(np.count_nonzero(pm & gm)) / union


def miou(acc: ConfusionAccumulator) -> float:
    """Unweighted mean of the defined per-class IoU values."""
    values = [v for v in acc.iou_per_class().values() if v is not None]
    if not values:
        raise ValueError("no class has a defined IoU (all unions empty)")
    return float(np.mean(values))


def write_iou_csv(
    path: str | Path,
    per_class: Sequence[tuple[str, Optional[float]]],
    mean_value: float,
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "iou"])
        for name, value in per_class:
            writer.writerow([name, "" if value is None else f"{value:.6f}"])
        writer.writerow(["mIoU", f"{mean_value:.6f}"])
