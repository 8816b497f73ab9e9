"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, as_tensor
from . import ops
from .scan import ScanParams, scan_2d, selective_scan

__all__ = ["grad_check", "grad_check_suite"]

# Coordinates where both gradients are below this floor are compared
# against the floor instead of each other, so pure rounding noise in the
# difference quotient cannot dominate the ratio.
_REL_FLOOR = 1e-6


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    fn may return a tensor of any shape; a fixed random projection reduces
    it to a scalar so that one backward pass covers every output.  Every
    coordinate of every input is perturbed by +-eps.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    inputs = [as_tensor(t) for t in inputs]
    for t in inputs:
        t.data = np.ascontiguousarray(t.data)  # flat views below must alias
    probe = fn(*inputs)
    rng = np.random.default_rng(12345)
    proj = rng.standard_normal(probe.shape)

    def scalar(*args: Tensor) -> float:
        return float((fn(*args).data * proj).sum())

    for t in inputs:
        t.requires_grad = True
        t.grad = None
    out = fn(*inputs)
    out.backward(proj)

    worst = 0.0
    for idx, t in enumerate(inputs):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = scalar(*inputs)
            flat[j] = orig - eps
            f_minus = scalar(*inputs)
            flat[j] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            an = analytic.reshape(-1)[j]
            scale = max(abs(fd), abs(an), _REL_FLOOR)
            worst = max(worst, abs(fd - an) / scale)
    for t in inputs:
        t.requires_grad = False
        t.grad = None
    return worst


def _lattice_safe_coords(rng: np.random.Generator, shape: tuple[int, ...], h: int, w: int) -> np.ndarray:
    """Random sample coordinates that stay away from interpolation kinks."""
    cols = rng.integers(0, w, size=shape)
    rows = rng.integers(1, max(h - 1, 2), size=shape)
    fx = rng.uniform(0.2, 0.8, size=shape)
    fy = rng.uniform(0.2, 0.8, size=shape)
    out = np.empty(shape + (2,))
    out[..., 0] = (cols + fx) / w
    out[..., 1] = np.clip((rows + fy) / h, 0.05, 0.95)
    return out


def grad_check_suite(seed: int = 0, eps: float = 1e-5) -> dict[str, float]:
    """Finite-difference errors for every differentiable op and the
    composite view-transform layer, across randomized shapes including
    size-1 axes."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}

    def t(*shape: int, scale: float = 1.0) -> Tensor:
        return Tensor(rng.standard_normal(shape) * scale)

    # linear, with a size-1 feature axis among the cases
    for tag, (m, k, n) in (("linear", (5, 4, 3)), ("linear_min", (1, 1, 2))):
        x, wgt, b = t(m, k), t(k, n), t(n)
        results[tag] = grad_check(lambda a, w_, b_: ops.linear(a, w_, b_), [x, wgt, b], eps)

    results["sigmoid"] = grad_check(ops.sigmoid, [t(4, 3)], eps)
    results["softplus"] = grad_check(ops.softplus, [t(6)], eps)
    results["silu"] = grad_check(ops.silu, [t(3, 2)], eps)
    results["log_softmax"] = grad_check(ops.log_softmax, [t(5, 4)], eps)

    g, b = t(6, scale=0.5), t(6, scale=0.5)
    results["layer_norm"] = grad_check(
        lambda x_, g_, b_: ops.layer_norm(x_, g_, b_), [t(3, 6), g, b], eps
    )

    for tag, (h, w, c, n) in (
        ("bilinear_sample", (5, 8, 3, 11)),
        ("bilinear_sample_min", (2, 1, 1, 4)),
    ):
        feat = t(h, w, c)
        coords = Tensor(_lattice_safe_coords(rng, (n,), h, w))
        results[tag] = grad_check(ops.bilinear_sample, [feat, coords], eps)

    def focal(lg: Tensor) -> Tensor:
        return ops.focal_loss(lg, targets, gamma=2.0, alpha=alpha)

    targets = rng.integers(0, 4, size=(7,))
    targets[0] = 255  # one ignored position
    alpha = rng.uniform(0.5, 1.5, size=4)
    results["focal_loss"] = grad_check(focal, [t(7, 4)], eps)

    def scan_case(tag: str, t_len: int, c_dim: int, s_dim: int) -> None:
        x = t(t_len, c_dim)
        a = Tensor(rng.uniform(-2.0, -0.2, size=(c_dim, s_dim)))
        bmap = t(c_dim, s_dim)
        cmap = t(c_dim, s_dim)
        draw = Tensor(rng.uniform(-1.0, 0.5, size=(c_dim,)))

        def run(x_, a_, b_, c_, d_):
            params = ScanParams(
                state_dim=s_dim, a=a_, b=b_, c=c_, delta=ops.softplus(d_)
            )
            return selective_scan(x_, params)

        results[tag] = grad_check(run, [x, a, bmap, cmap, draw], eps)

    scan_case("selective_scan", 6, 3, 4)
    scan_case("selective_scan_min", 1, 1, 1)

    def run_2d(x_, *flat):
        params = [
            ScanParams(
                state_dim=2,
                a=flat[4 * i],
                b=flat[4 * i + 1],
                c=flat[4 * i + 2],
                delta=ops.softplus(flat[4 * i + 3]),
            )
            for i in range(4)
        ]
        return scan_2d(x_, params)

    c_dim = 2
    flat_params: list[Tensor] = []
    for _ in range(4):
        flat_params.extend(
            [
                Tensor(rng.uniform(-2.0, -0.2, size=(c_dim, 2))),
                t(c_dim, 2),
                t(c_dim, 2),
                Tensor(rng.uniform(-1.0, 0.5, size=(c_dim,))),
            ]
        )
    results["scan_2d"] = grad_check(run_2d, [t(3, 4, c_dim), *flat_params], eps)

    # composite view-transform layer, desk sized
    from ..model import ModelConfig, init_params, view_transform_layer

    cfg = ModelConfig(
        emb_dims=4,
        layers=1,
        locs=2,
        points=4,
        scan_depth=1,
        query_h=2,
        query_w=2,
        out_h=4,
        out_w=4,
        num_classes=2,
        state_dim=2,
        seed=seed,
    )
    params = init_params(cfg)
    f360 = t(3, 5, cfg.emb_dims)
    names = sorted(n for n in params if n.startswith("layer0."))
    tensors = [params[n] for n in names]
    q0 = params["queries"]
    z0 = params["pos_embed"]

    def run_layer(f_, q_, z_, *layer_tensors):
        lp = {n.removeprefix("layer0."): v for n, v in zip(names, layer_tensors)}
        return view_transform_layer(q_, z_, f_, lp, cfg)

    results["view_transform_layer"] = grad_check(run_layer, [f360, q0, z0, *tensors], eps)
    return results
