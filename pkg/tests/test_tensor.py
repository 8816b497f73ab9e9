"""Tests for the reverse-mode autodiff core.

Analytic gradients for the hand cases:

* y = (x + 1)(x + 2) at x = 3: dy/dx = (x + 2) + (x + 1) = 9
* y = sum(a / b): dy/da = 1/b, dy/db = -a/b^2
* phi1(z) = expm1(z)/z: phi1(0) = 1, phi1'(0) = 1/2
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from panobev.nn.tensor import (
    Tensor,
    exp,
    expm1,
    flip,
    gather_pairs,
    log,
    phi1,
    repeat_axis,
    sqrt,
)


class TestForwardValues:
    def test_arithmetic(self):
        a = Tensor(np.array([1.0, 2.0]))
        b = Tensor(np.array([3.0, 5.0]))
        np.testing.assert_allclose((a + b).data, [4.0, 7.0])
        np.testing.assert_allclose((a - b).data, [-2.0, -3.0])
        np.testing.assert_allclose((a * b).data, [3.0, 10.0])
        np.testing.assert_allclose((a / b).data, [1.0 / 3.0, 0.4])
        np.testing.assert_allclose((a**2).data, [1.0, 4.0])
        np.testing.assert_allclose((2.0 - a).data, [1.0, 0.0])
        np.testing.assert_allclose((1.0 / b).data, [1.0 / 3.0, 0.2])

    def test_unary_functions(self):
        x = Tensor(np.array([0.0, 1.0, -0.5]))
        np.testing.assert_allclose(exp(x).data, np.exp(x.data))
        np.testing.assert_allclose(expm1(x).data, np.expm1(x.data))
        np.testing.assert_allclose(sqrt(Tensor(np.array([4.0, 9.0]))).data, [2.0, 3.0])
        np.testing.assert_allclose(log(Tensor(np.array([1.0, math.e]))).data, [0.0, 1.0])

    def test_matmul_against_loop(self):
        rng = np.random.default_rng(113)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 5))
        out = (Tensor(a) @ Tensor(b)).data
        ref = np.zeros((3, 5))
        for i in range(3):
            for j in range(5):
                for k in range(4):
                    ref[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_matmul_rejects_non_2d(self):
        with pytest.raises(ValueError):
            Tensor(np.zeros(3)) @ Tensor(np.zeros((3, 2)))

    def test_float32_passthrough(self):
        x = Tensor(np.zeros(3, dtype=np.float32))
        assert x.data.dtype == np.float32
        y = Tensor(np.array([1, 2, 3]))
        assert y.data.dtype == np.float64


class TestBackwardBasics:
    def test_product_rule_diamond(self):
        # y = (x + 1)(x + 2) reuses x along two paths; dy/dx = 9 at x = 3
        x = Tensor(np.array(3.0), requires_grad=True)
        y = (x + 1.0) * (x + 2.0)
        y.backward()
        assert y.data == pytest.approx(20.0)
        assert x.grad == pytest.approx(9.0)

    def test_reuse_accumulates(self):
        x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        y = (x * x).sum()  # dy/dx = 2x
        y.backward()
        np.testing.assert_allclose(x.grad, [4.0, -2.0])

    def test_division_gradients(self):
        a = Tensor(np.array([1.0, 4.0]), requires_grad=True)
        b = Tensor(np.array([2.0, 8.0]), requires_grad=True)
        (a / b).sum().backward()
        np.testing.assert_allclose(a.grad, 1.0 / b.data)
        np.testing.assert_allclose(b.grad, -a.data / b.data**2)

    def test_non_scalar_needs_seed(self):
        x = Tensor(np.zeros(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2.0).backward()
        (x * 2.0).backward(np.array([1.0, 0.0, 1.0]))
        np.testing.assert_allclose(x.grad, [2.0, 0.0, 2.0])

    def test_seed_shape_checked(self):
        x = Tensor(np.zeros(3), requires_grad=True)
        with pytest.raises(ValueError, match="seed"):
            (x * 2.0).backward(np.zeros(4))

    def test_detach_blocks_gradient(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = x * 3.0
        z = y.detach() * x  # only the direct factor sees the gradient
        z.backward()
        assert x.grad == pytest.approx(6.0)

    def test_intermediate_with_requires_grad_also_accumulates(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = x * 3.0
        y.requires_grad = True
        (y * y).backward()
        assert y.grad == pytest.approx(12.0)  # d(y^2)/dy = 2y
        assert x.grad == pytest.approx(36.0)  # chain through y = 3x

    def test_grads_accumulate_across_backward_calls(self):
        x = Tensor(np.array(1.0), requires_grad=True)
        (x * 2.0).backward()
        (x * 2.0).backward()
        assert x.grad == pytest.approx(4.0)


class TestBroadcasting:
    def test_unbroadcast_shapes(self):
        a = Tensor(np.ones((3, 1)), requires_grad=True)
        b = Tensor(np.ones((1, 4)), requires_grad=True)
        (a + b).sum().backward()
        assert a.grad.shape == (3, 1)
        assert b.grad.shape == (1, 4)
        np.testing.assert_allclose(a.grad, 4.0)  # summed over 4 columns
        np.testing.assert_allclose(b.grad, 3.0)  # summed over 3 rows

    def test_scalar_broadcast(self):
        a = Tensor(np.ones((2, 3)), requires_grad=True)
        (a * 5.0).sum().backward()
        np.testing.assert_allclose(a.grad, 5.0)

    def test_weighted_broadcast_mul(self):
        a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
        w = Tensor(np.array([10.0, 100.0]), requires_grad=True)
        (a * w).sum().backward()
        np.testing.assert_allclose(a.grad, [[10.0, 100.0], [10.0, 100.0]])
        np.testing.assert_allclose(w.grad, [4.0, 6.0])  # column sums of a


class TestShapeOps:
    def test_reshape_round_trip(self):
        x = Tensor(np.arange(6.0), requires_grad=True)
        y = x.reshape(2, 3).reshape((6,))
        np.testing.assert_allclose(y.data, x.data)
        (y * np.arange(6.0)).sum().backward()
        np.testing.assert_allclose(x.grad, np.arange(6.0))

    def test_transpose_gradient_untransposes(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        y = x.transpose((1, 0))
        assert y.shape == (3, 2)
        seed = np.arange(6.0).reshape(3, 2)
        y.backward(seed)
        np.testing.assert_allclose(x.grad, seed.transpose(1, 0))

    def test_flip_gradient_flips_back(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        flip(x, 0).backward(np.array([10.0, 20.0, 30.0]))
        np.testing.assert_allclose(x.grad, [30.0, 20.0, 10.0])

    def test_repeat_axis_forward(self):
        x = Tensor(np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(repeat_axis(x, 2, 1).data, [[1.0, 1.0, 2.0, 2.0]])
        np.testing.assert_allclose(
            repeat_axis(x, 2, 0).data, [[1.0, 2.0], [1.0, 2.0]]
        )

    def test_repeat_axis_backward_sums_blocks(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        repeat_axis(x, 3, 0).backward(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
        np.testing.assert_allclose(x.grad, [6.0, 15.0])

    def test_repeat_axis_rejects_bad_repeats(self):
        with pytest.raises(ValueError):
            repeat_axis(Tensor(np.zeros(2)), 0, 0)


class TestReductions:
    def test_sum_axis_and_keepdims(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        assert x.sum().data == pytest.approx(15.0)
        np.testing.assert_allclose(x.sum(axis=0).data, [3.0, 5.0, 7.0])
        np.testing.assert_allclose(x.sum(axis=1, keepdims=True).data, [[3.0], [12.0]])
        x.sum(axis=1).backward(np.array([1.0, 10.0]))
        np.testing.assert_allclose(x.grad, [[1.0, 1.0, 1.0], [10.0, 10.0, 10.0]])

    def test_mean(self):
        x = Tensor(np.array([[1.0, 3.0], [5.0, 7.0]]), requires_grad=True)
        m = x.mean()
        assert m.data == pytest.approx(4.0)
        m.backward()
        np.testing.assert_allclose(x.grad, 0.25)


class TestSpecialFunctions:
    def test_phi1_at_zero(self):
        assert phi1(Tensor(np.array(0.0))).data == pytest.approx(1.0)

    def test_phi1_matches_definition_away_from_zero(self):
        z = np.array([-2.0, -0.3, 0.4, 3.0])
        np.testing.assert_allclose(phi1(Tensor(z)).data, np.expm1(z) / z, rtol=1e-15)

    def test_phi1_is_smooth_near_zero(self):
        # Taylor: phi1(z) = 1 + z/2 + z^2/6 + ...
        z = 1e-9
        assert phi1(Tensor(np.array(z))).data == pytest.approx(1.0 + z / 2.0, abs=1e-15)

    def test_phi1_gradient_at_zero(self):
        x = Tensor(np.array(0.0), requires_grad=True)
        phi1(x).backward()
        assert x.grad == pytest.approx(0.5)

    def test_phi1_gradient_matches_quotient_rule(self):
        x = Tensor(np.array([0.7, -1.3]), requires_grad=True)
        phi1(x).sum().backward()
        z = x.data
        expected = (z * np.exp(z) - np.expm1(z)) / z**2
        np.testing.assert_allclose(x.grad, expected, rtol=1e-12)


class TestGatherPairs:
    def test_forward(self):
        a = Tensor(np.arange(12.0).reshape(3, 4))
        out = gather_pairs(a, np.array([0, 2, 1]), np.array([3, 0, 1]))
        np.testing.assert_allclose(out.data, [3.0, 8.0, 5.0])

    def test_backward_scatter_adds_duplicates(self):
        a = Tensor(np.zeros((2, 2)), requires_grad=True)
        out = gather_pairs(a, np.array([0, 0, 1]), np.array([1, 1, 0]))
        out.backward(np.array([1.0, 10.0, 5.0]))
        np.testing.assert_allclose(a.grad, [[0.0, 11.0], [5.0, 0.0]])

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            gather_pairs(Tensor(np.zeros(3)), np.array([0]), np.array([0]))
