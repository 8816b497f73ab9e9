"""Tests for per-class IoU and its unweighted mean.

The six-value mean pinned at the bottom is
    (79.2 + 47.6 + 53.2 + 43.4 + 44.3 + 39.0) / 6
  = 306.7 / 6
  = 51.11666666666667
"""

from __future__ import annotations

import numpy as np
import pytest

from panobev.metrics import ConfusionAccumulator, iou, miou, write_iou_csv
from panobev.stats import IGNORE_INDEX


def u8(rows) -> np.ndarray:
    return np.array(rows, dtype=np.uint8)


class TestSinglePairIoU:
    def test_perfect_match(self):
        a = u8([[0, 1], [1, 2]])
        for c in (0, 1, 2):
            assert iou(a, a, c) == pytest.approx(1.0)

    def test_disjoint_masks(self):
        pred = u8([[1, 1], [0, 0]])
        gt = u8([[0, 0], [1, 1]])
        assert iou(pred, gt, 1) == pytest.approx(0.0)

    def test_hand_overlap(self):
        # prediction marks the top row, reference the left column:
        # intersection 1 pixel, union 3, IoU = 1/3
        pred = u8([[1, 1], [0, 0]])
        gt = u8([[1, 0], [1, 0]])
        assert iou(pred, gt, 1) == pytest.approx(1.0 / 3.0)

    def test_absent_class_is_undefined(self):
        a = u8([[0, 0], [0, 0]])
        assert iou(a, a, 5) is None

    def test_ignored_positions_excluded_from_either_side(self):
        # bottom row disagrees, but marking it ignored in one input
        # removes those positions entirely
        pred = u8([[1, 1], [1, 1]])
        gt = u8([[1, 1], [0, 0]])
        assert iou(pred, gt, 1) == pytest.approx(0.5)
        gt_masked = u8([[1, 1], [IGNORE_INDEX, IGNORE_INDEX]])
        assert iou(pred, gt_masked, 1) == pytest.approx(1.0)
        pred_masked = u8([[1, 1], [IGNORE_INDEX, IGNORE_INDEX]])
        assert iou(pred_masked, gt, 1) == pytest.approx(1.0)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(97)
        for _ in range(30):
            pred = rng.choice(
                np.array([0, 1, 2, IGNORE_INDEX], dtype=np.uint8), size=(6, 6)
            )
            gt = rng.choice(
                np.array([0, 1, 2, IGNORE_INDEX], dtype=np.uint8), size=(6, 6)
            )
            for c in (0, 1, 2):
                assert iou(pred, gt, c) == iou(gt, pred, c)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shapes"):
            iou(u8([[0]]), u8([[0, 1]]), 0)


class TestConfusionAccumulator:
    def test_streaming_equals_whole(self):
        rng = np.random.default_rng(101)
        pred = rng.choice(np.array([0, 1, 2], dtype=np.uint8), size=(12, 9))
        gt = rng.choice(np.array([0, 1, 2], dtype=np.uint8), size=(12, 9))
        whole = ConfusionAccumulator(class_ids=(0, 1, 2))
        whole.add(pred, gt)
        parts = ConfusionAccumulator(class_ids=(0, 1, 2))
        for r in range(12):
            parts.add(pred[r], gt[r])
        np.testing.assert_array_equal(parts.intersection, whole.intersection)
        np.testing.assert_array_equal(parts.union, whole.union)
        np.testing.assert_array_equal(parts.support, whole.support)

    def test_merge_matches_joint_add(self):
        rng = np.random.default_rng(103)
        frames = [
            (
                rng.choice(np.array([0, 1], dtype=np.uint8), size=(5, 5)),
                rng.choice(np.array([0, 1], dtype=np.uint8), size=(5, 5)),
            )
            for _ in range(4)
        ]
        joint = ConfusionAccumulator(class_ids=(0, 1))
        for p, g in frames:
            joint.add(p, g)
        a = ConfusionAccumulator(class_ids=(0, 1))
        b = ConfusionAccumulator(class_ids=(0, 1))
        for p, g in frames[:2]:
            a.add(p, g)
        for p, g in frames[2:]:
            b.add(p, g)
        merged = a.merge(b)
        np.testing.assert_array_equal(merged.intersection, joint.intersection)
        np.testing.assert_array_equal(merged.union, joint.union)
        np.testing.assert_array_equal(merged.support, joint.support)

    def test_merge_requires_same_classes(self):
        a = ConfusionAccumulator(class_ids=(0, 1))
        b = ConfusionAccumulator(class_ids=(0, 2))
        with pytest.raises(ValueError, match="class lists"):
            a.merge(b)

    def test_intersection_never_exceeds_union(self):
        rng = np.random.default_rng(107)
        acc = ConfusionAccumulator(class_ids=(0, 1, 2, 3))
        for _ in range(10):
            acc.add(
                rng.choice(np.array([0, 1, 2, 3], dtype=np.uint8), size=(7, 7)),
                rng.choice(np.array([0, 1, 2, 3], dtype=np.uint8), size=(7, 7)),
            )
        assert np.all(acc.intersection <= acc.union)
        assert np.all(acc.support <= acc.union)

    def test_reserved_class_id_rejected(self):
        with pytest.raises(ValueError, match="reserved"):
            ConfusionAccumulator(class_ids=(0, IGNORE_INDEX))


class TestMeanIoU:
    def test_undefined_classes_skipped(self):
        # class 2 never appears: mean over classes 0 and 1 only
        acc = ConfusionAccumulator(class_ids=(0, 1, 2))
        acc.add(u8([[0, 1]]), u8([[0, 0]]))
        per = acc.iou_per_class()
        assert per[0] == pytest.approx(0.5)  # i=1, u=2
        assert per[1] == pytest.approx(0.0)  # i=0, u=1
        assert per[2] is None
        assert miou(acc) == pytest.approx(0.25)

    def test_all_undefined_rejected(self):
        acc = ConfusionAccumulator(class_ids=(0,))
        acc.add(u8([[1]]), u8([[1]]))
        # class 0 absent everywhere: the only entry is undefined
        assert acc.iou_per_class()[0] is None
        with pytest.raises(ValueError, match="union"):
            miou(acc)

    def test_six_class_benchmark_mean(self):
        # per-class percentages 79.2, 47.6, 53.2, 43.4, 44.3, 39.0 realized
        # as exact intersection/union count pairs out of 1000
        targets = [792, 476, 532, 434, 443, 390]
        acc = ConfusionAccumulator(
            class_ids=(0, 1, 2, 3, 4, 5),
            intersection=np.array(targets, dtype=np.int64),
            union=np.full(6, 1000, dtype=np.int64),
            support=np.full(6, 1000, dtype=np.int64),
        )
        mean_pct = miou(acc) * 100.0
        assert mean_pct == pytest.approx(51.11666666666667, abs=1e-10)
        assert abs(mean_pct - 51.1) <= 0.05

    def test_csv_output(self, tmp_path):
        path = tmp_path / "iou.csv"
        write_iou_csv(path, [("road", 0.5), ("wall", None)], 0.5)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "class,iou"
        assert lines[1] == "road,0.500000"
        assert lines[2] == "wall,"
        assert lines[3] == "mIoU,0.500000"
