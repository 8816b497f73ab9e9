"""Differentiable building blocks on top of the Tensor primitives."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .tensor import Tensor, _make, as_tensor, gather_pairs, matmul
from . import tensor as T

__all__ = [
    "linear",
    "sigmoid",
    "softplus",
    "silu",
    "softmax",
    "log_softmax",
    "layer_norm",
    "bilinear_sample",
    "focal_loss",
]


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map over the last axis: x @ weight (+ bias)."""
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(
            f"linear expects last axis {weight.shape[0]}, got input shape {x.shape}"
        )
    lead = x.shape[:-1]
    flat = x.reshape((int(np.prod(lead)) if lead else 1, x.shape[-1]))
    out = matmul(flat, weight)
    if bias is not None:
        out = out + bias
    return out.reshape(lead + (weight.shape[1],))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    z = x.data
    out = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), backward)


def softplus(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)

    def backward(g):
        return (g / (1.0 + np.exp(-x.data)),)

    return _make(out, (x,), backward)


def silu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    return x * sigmoid(x)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data
    m = z.max(axis=axis, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        soft = np.exp(out)
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return T.exp(log_softmax(x, axis=axis))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis to zero mean, unit variance, then affine."""
    x = as_tensor(x)
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = (var + as_tensor(np.array(eps))) ** -0.5
    return centered * inv * gain + bias


def bilinear_sample(feature: Tensor, coords: Tensor) -> Tensor:
    """Sample an (H, W, C) map at normalized (x, y) positions in [0, 1]^2.

    The x axis wraps cyclically (panorama azimuth), the y axis clamps at
    the borders.  x maps to pixel column x*W and y to row y*H, so lattice
    points sit at integer multiples of 1/W and 1/H.  coords has shape
    (..., 2); the result has shape (..., C).  Gradients flow into both
    the feature map and the coordinates.
    """
    feature = as_tensor(feature)
    coords = as_tensor(coords)
    if feature.ndim != 3:
        raise ValueError(f"feature map must be (H, W, C), got {feature.shape}")
    if coords.shape[-1] != 2:
        raise ValueError(f"coords must end in an (x, y) pair, got {coords.shape}")
    h, w, c = feature.shape
    lead = coords.shape[:-1]
    pts = coords.data.reshape(-1, 2)
    n = pts.shape[0]

    u = pts[:, 0] * w
    v_raw = pts[:, 1] * h
    v = np.clip(v_raw, 0.0, h - 1.0)

    x0 = np.floor(u)
    fx = u - x0
    x0i = np.mod(x0, w).astype(np.int64)
    x1i = np.mod(x0 + 1.0, w).astype(np.int64)
    y0i = np.floor(v).astype(np.int64)
    y1i = np.minimum(y0i + 1, h - 1)
    fy = v - y0i

    f = feature.data
    f00 = f[y0i, x0i]
    f01 = f[y0i, x1i]
    f10 = f[y1i, x0i]
    f11 = f[y1i, x1i]
    wx, wy = fx[:, None], fy[:, None]
    out = (
        f00 * (1.0 - wx) * (1.0 - wy)
        + f01 * wx * (1.0 - wy)
        + f10 * (1.0 - wx) * wy
        + f11 * wx * wy
    ).reshape(lead + (c,))

    # y gradient vanishes where the coordinate is clamped flat
    v_free = (v_raw > 0.0) & (v_raw < h - 1.0)

    def backward(g):
        g2 = g.reshape(n, c)
        gfeat = np.zeros_like(f, dtype=np.float64)
        np.add.at(gfeat, (y0i, x0i), g2 * (1.0 - wx) * (1.0 - wy))
        np.add.at(gfeat, (y0i, x1i), g2 * wx * (1.0 - wy))
        np.add.at(gfeat, (y1i, x0i), g2 * (1.0 - wx) * wy)
        np.add.at(gfeat, (y1i, x1i), g2 * wx * wy)

        du = ((f01 - f00) * (1.0 - wy) + (f11 - f10) * wy) * g2
        dv = ((f10 - f00) * (1.0 - wx) + (f11 - f01) * wx) * g2
        gc = np.empty((n, 2), dtype=np.float64)
        gc[:, 0] = du.sum(axis=1) * w
        gc[:, 1] = dv.sum(axis=1) * h * v_free
        return gfeat, gc.reshape(lead + (2,))

    return _make(out, (feature, coords), backward)


def focal_loss(
    logits: Tensor,
    targets: np.ndarray,
    gamma: float = 2.0,
    alpha: Optional[np.ndarray] = None,
    ignore_index: int = 255,
) -> Tensor:
    """Mean focal loss over non-ignored positions.

    logits has shape (..., K) and targets the matching (...) integer class
    indices; positions equal to ignore_index are dropped.  gamma = 0 with
    uniform alpha reduces to plain cross-entropy.
    """
    logits = as_tensor(logits)
    k = logits.shape[-1]
    tgt = np.asarray(targets)
    if tgt.shape != logits.shape[:-1]:
        raise ValueError(
            f"targets shape {tgt.shape} does not match logits {logits.shape[:-1]}"
        )
    if gamma < 0.0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    flat_t = tgt.reshape(-1).astype(np.int64)
    keep = flat_t != ignore_index
    if not keep.any():
        raise ValueError("every position is ignored; focal loss is undefined")
    rows = np.nonzero(keep)[0]
    classes = flat_t[rows]
    if classes.min() < 0 or classes.max() >= k:
        raise ValueError("target class indices out of range")

    flat_logits = logits.reshape((flat_t.size, k))
    logp = log_softmax(flat_logits, axis=-1)
    logp_y = gather_pairs(logp, rows, classes)
    p_y = T.exp(logp_y)

    if alpha is None:
        alpha_y = np.ones(rows.size)
    else:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != (k,):
            raise ValueError(f"alpha must have shape ({k},), got {alpha.shape}")
        alpha_y = alpha[classes]

    nll = -(logp_y * as_tensor(alpha_y))
    if gamma != 0.0:
        nll = (as_tensor(np.array(1.0)) - p_y) ** gamma * nll
    return nll.sum() * as_tensor(np.array(1.0 / rows.size))
