"""Linear state-space scans: per-channel recurrence and four-direction 2-d mixing.

Each channel c carries an independent diagonal state-space system with
state size S.  The continuous parameters (state matrix diagonal a, input
map b, output map c_out, step size delta > 0) are discretized by zero-order
hold:

    a_bar = exp(delta * a)
    b_bar = delta * phi1(delta * a) * b        with phi1(z) = (e^z - 1)/z

and the recurrence over a length-T sequence x is

    h_t = a_bar * h_{t-1} + b_bar * x_t,    y_t = sum_s c_out * h_t,  h_0 = 0.

The 2-d variant flattens an (H, W, C) map along four directions (row-major
forward/backward, column-major forward/backward), scans each with its own
parameters, restores the spatial layout and sums the four results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Tensor, _make, as_tensor, flip, phi1, reshape, transpose
from . import tensor as T

__all__ = ["ScanParams", "ssm_recurrence", "selective_scan", "scan_2d"]


@dataclass
class ScanParams:
    """Continuous per-channel scan parameters; delta must be positive."""

    state_dim: int
    a: Tensor  # (C, S) state matrix diagonal
    b: Tensor  # (C, S) input map
    c: Tensor  # (C, S) output map
    delta: Tensor  # (C,) step size, strictly positive

    def __post_init__(self) -> None:
        if self.state_dim < 1:
            raise ValueError(f"state_dim must be positive, got {self.state_dim}")
        self.a = as_tensor(self.a)
        self.b = as_tensor(self.b)
        self.c = as_tensor(self.c)
        self.delta = as_tensor(self.delta)
        s = self.state_dim
        for name in ("a", "b", "c"):
            t = getattr(self, name)
            if t.ndim != 2 or t.shape[1] != s:
                raise ValueError(f"scan parameter {name} must be (C, {s}), got {t.shape}")
        c_dim = self.a.shape[0]
        if self.b.shape[0] != c_dim or self.c.shape[0] != c_dim:
            raise ValueError("scan parameters must agree on the channel count")
        if self.delta.shape != (c_dim,):
            raise ValueError(f"delta must be ({c_dim},), got {self.delta.shape}")
        if np.any(self.delta.data <= 0.0):
            raise ValueError("step size delta must be strictly positive")

    @property
    def channels(self) -> int:
        return self.a.shape[0]


def ssm_recurrence(x: Tensor, a_bar: Tensor, b_bar: Tensor, c_out: Tensor) -> Tensor:
    """Run the discrete recurrence; x is (T, C), parameters (C, S).

    The backward pass propagates the adjoint state lambda_t =
    dL/dy_t * c_out + a_bar * lambda_{t+1} from the end of the sequence
    to the start, mirroring the forward loop.
    """
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"scan input must be (T, C), got {x.shape}")
    t_len, c_dim = x.shape
    if t_len < 1:
        raise ValueError("scan needs at least one step")
    for name, p in (("a_bar", a_bar), ("b_bar", b_bar), ("c_out", c_out)):
        if p.ndim != 2 or p.shape[0] != c_dim:
            raise ValueError(f"{name} must be ({c_dim}, S), got {p.shape}")

    ab, bb, co = a_bar.data, b_bar.data, c_out.data
    xs = x.data
    s_dim = ab.shape[1]
    hs = np.empty((t_len, c_dim, s_dim))
    h = np.zeros((c_dim, s_dim))
    for t in range(t_len):
        h = ab * h + bb * xs[t][:, None]
        hs[t] = h
    out = np.einsum("tcs,cs->tc", hs, co)

    def backward(g):
        lam = np.zeros((c_dim, s_dim))
        gx = np.empty((t_len, c_dim))
        g_ab = np.zeros((c_dim, s_dim))
        g_bb = np.zeros((c_dim, s_dim))
        g_co = np.einsum("tc,tcs->cs", g, hs)
        for t in range(t_len - 1, -1, -1):
            lam = g[t][:, None] * co + ab * lam
            gx[t] = (lam * bb).sum(axis=1)
            g_bb += lam * xs[t][:, None]
            if t > 0:
                g_ab += lam * hs[t - 1]
        return gx, g_ab, g_bb, g_co

    return _make(out, (x, a_bar, b_bar, c_out), backward)


def discretize(params: ScanParams) -> tuple[Tensor, Tensor]:
    """Zero-order-hold (a_bar, b_bar) from the continuous parameters."""
    dc = params.delta.reshape(params.channels, 1)
    za = dc * params.a
    a_bar = T.exp(za)
    b_bar = dc * phi1(za) * params.b
    return a_bar, b_bar


def selective_scan(x: Tensor, params: ScanParams) -> Tensor:
    """Scan a (T, C) sequence with per-channel state-space parameters."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"scan input must be (T, C), got {x.shape}")
    if x.shape[1] != params.channels:
        raise ValueError(
            f"input has {x.shape[1]} channels but parameters have {params.channels}"
        )
    a_bar, b_bar = discretize(params)
    return ssm_recurrence(x, a_bar, b_bar, params.c)


def scan_2d(x: Tensor, params: Sequence[ScanParams]) -> Tensor:
    """Four-direction planar scan of an (H, W, C) map.

    Directions, in parameter order: row-major forward, row-major backward,
    column-major forward, column-major backward.  Outputs are restored to
    the original layout and summed.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"scan_2d input must be (H, W, C), got {x.shape}")
    if len(params) != 4:
        raise ValueError(f"scan_2d needs 4 parameter sets, got {len(params)}")
    h, w, c = x.shape
    for p in params:
        if p.channels != c:
            raise ValueError("scan parameters must match the channel count")

    row_seq = reshape(x, (h * w, c))
    col_seq = reshape(transpose(x, (1, 0, 2)), (w * h, c))

    y0 = selective_scan(row_seq, params[0])
    y1 = flip(selective_scan(flip(row_seq, 0), params[1]), 0)
    y2 = selective_scan(col_seq, params[2])
    y3 = flip(selective_scan(flip(col_seq, 0), params[3]), 0)

    back_row = reshape(y0 + y1, (h, w, c))
    back_col = transpose(reshape(y2 + y3, (w, h, c)), (1, 0, 2))
    return back_row + back_col
