"""Front-view panorama to bird's-eye-view semantic mapping model.

The model keeps a fixed grid of learnable queries over the output map.
Each layer lets every query gather a small set of bilinear samples from
the panorama feature map at learned, query-conditioned locations, lays the
gathered vectors out as one block per query, re-embeds each block back to
one vector per query, and mixes the resulting query map with residual
four-direction state-space scans.  A light strided patch encoder produces
the panorama features and a pointwise decoder with nearest upsampling
turns the final query map into class logits.

All coordinates handed to the sampler are normalized to [0, 1]^2 with x
along the panorama width (wrapping) and y along the height (clamping).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .nn import ScanParams, Tensor, as_tensor, bilinear_sample, layer_norm, linear
from .nn import scan_2d, sigmoid, silu, softplus
from .nn.tensor import reshape, transpose

__all__ = [
    "ModelConfig",
    "BevState",
    "PAPER_CONFIG",
    "init_state",
    "init_params",
    "reference_points",
    "sampling_offsets",
    "gather_samples",
    "aggregate",
    "patch_embed",
    "view_transform_layer",
    "encode",
    "decode",
    "model_forward",
    "layer_param_count",
    "stack_param_count",
]

ENCODER_STRIDE = 16  # two patch stages of stride 4


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of the view-transform stack and its surroundings."""

    emb_dims: int = 128
    layers: int = 4
    locs: int = 5
    points: int = 25
    scan_depth: int = 2
    query_h: int = 50
    query_w: int = 50
    out_h: int = 200
    out_w: int = 200
    num_classes: int = 6
    state_dim: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        for name in (
            "emb_dims",
            "layers",
            "locs",
            "points",
            "scan_depth",
            "query_h",
            "query_w",
            "out_h",
            "out_w",
            "num_classes",
            "state_dim",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"config field {name} must be positive")
        if self.points != self.locs * self.locs:
            raise ValueError(
                f"points must equal locs^2, got points={self.points}, locs={self.locs}"
            )
        if self.out_h % self.query_h or self.out_w % self.query_w:
            raise ValueError(
                f"output dims {self.out_h}x{self.out_w} must be integer multiples "
                f"of the query grid {self.query_h}x{self.query_w}"
            )

    @property
    def depth_per_loc(self) -> int:
        """Samples per location; the per-query block is locs x depth_per_loc."""
        return self.points // self.locs


PAPER_CONFIG = ModelConfig()


@dataclass
class BevState:
    """Learnable query content (q) and fixed positional code (z)."""

    q: Tensor  # (H_q, W_q, C)
    z: Tensor  # (H_q, W_q, C)


def _inverse_sigmoid(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-6, 1.0 - 1e-6)
    return np.log(p / (1.0 - p))


def init_state(cfg: ModelConfig, seed: int | None = None) -> BevState:
    """Fresh query and positional tensors, normal(0, 0.02), deterministic."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    shape = (cfg.query_h, cfg.query_w, cfg.emb_dims)
    q = Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)
    z = Tensor(rng.normal(0.0, 0.02, size=shape), requires_grad=True)
    return BevState(q=q, z=z)


def _encoder_mid_dims(cfg: ModelConfig) -> int:
    return max(cfg.emb_dims // 2, 4)


def init_params(cfg: ModelConfig, in_channels: int = 3) -> dict[str, Tensor]:
    """All trainable tensors, keyed by dotted names, seeded by cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    c = cfg.emb_dims
    locs, depth = cfg.locs, cfg.depth_per_loc

    def normal(*shape: int, scale: float = 0.02) -> Tensor:
        return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)

    def zeros(*shape: int) -> Tensor:
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(*shape: int) -> Tensor:
        return Tensor(np.ones(shape), requires_grad=True)

    params: dict[str, Tensor] = {}

    state = init_state(cfg)
    params["queries"] = state.q
    params["pos_embed"] = state.z

    mid = _encoder_mid_dims(cfg)
    params["enc.s1_w"] = normal(16 * in_channels, mid, scale=0.05)
    params["enc.s1_b"] = zeros(mid)
    params["enc.s1_g"] = ones(mid)
    params["enc.s1_beta"] = zeros(mid)
    params["enc.s2_w"] = normal(16 * mid, c, scale=0.05)
    params["enc.s2_b"] = zeros(c)
    params["enc.s2_g"] = ones(c)
    params["enc.s2_beta"] = zeros(c)

    # reference-point projections start at a uniform azimuth spread
    grid_u = (np.arange(locs) + 0.5) / locs
    ref_bias = np.zeros(2 * locs)
    ref_bias[0::2] = _inverse_sigmoid(grid_u)
    ref_bias[1::2] = 0.0  # mid-height

    for i in range(cfg.layers):
        pre = f"layer{i}."
        params[pre + "ref_w"] = normal(c, 2 * locs)
        params[pre + "ref_b"] = Tensor(ref_bias.copy(), requires_grad=True)
        params[pre + "off_w"] = zeros(c, 2 * cfg.points)
        params[pre + "off_b"] = zeros(2 * cfg.points)
        params[pre + "proj_w"] = normal(c, c, scale=1.0 / math.sqrt(c))
        params[pre + "pe_w"] = normal(locs * depth * c, c, scale=1.0 / math.sqrt(locs * depth * c))
        params[pre + "pe_b"] = zeros(c)
        for d in range(cfg.scan_depth):
            mix = pre + f"mix{d}."
            params[mix + "ln_g"] = ones(c)
            params[mix + "ln_b"] = zeros(c)
            for k in range(4):
                s = cfg.state_dim
                params[mix + f"scan{k}.a"] = Tensor(
                    -np.tile(np.arange(1.0, s + 1.0), (c, 1)), requires_grad=True
                )
                params[mix + f"scan{k}.b"] = ones(c, s)
                params[mix + f"scan{k}.c"] = normal(c, s, scale=0.5 / math.sqrt(s))
                # softplus(raw) ~= 0.05 step size at start
                params[mix + f"scan{k}.d"] = Tensor(
                    np.full(c, math.log(math.expm1(0.05))), requires_grad=True
                )

    params["dec.w1"] = normal(c, c, scale=1.0 / math.sqrt(c))
    params["dec.b1"] = zeros(c)
    params["dec.w2"] = normal(c, cfg.num_classes, scale=1.0 / math.sqrt(c))
    params["dec.b2"] = zeros(cfg.num_classes)
    return params


def layer_param_count(cfg: ModelConfig) -> int:
    """Trainable scalars in one view-transform layer."""
    c, locs, depth = cfg.emb_dims, cfg.locs, cfg.depth_per_loc
    count = c * 2 * locs + 2 * locs  # reference-point projection
    count += c * 2 * cfg.points + 2 * cfg.points  # offset projection
    count += c * c  # sample projection
    count += locs * depth * c * c + c  # block re-embedding
    per_block = 2 * c + 4 * (3 * c * cfg.state_dim + c)
    count += cfg.scan_depth * per_block
    return count


def stack_param_count(cfg: ModelConfig) -> int:
    """Trainable scalars across the whole view-transform stack."""
    return cfg.layers * layer_param_count(cfg)


def reference_points(z: Tensor, weight: Tensor, bias: Tensor, locs: int) -> Tensor:
    """Per-query anchor positions in (0, 1)^2: sigmoid(linear(z)).

    Result shape (H_q, W_q, locs, 2).
    """
    if weight.shape[1] != 2 * locs:
        raise ValueError(
            f"reference projection must emit {2 * locs} values, got {weight.shape[1]}"
        )
    hq, wq, _ = z.shape
    p = sigmoid(linear(z, weight, bias))
    return reshape(p, (hq, wq, locs, 2))


def sampling_offsets(q: Tensor, weight: Tensor, bias: Tensor, points: int) -> Tensor:
    """Query-conditioned sample displacements, shape (H_q, W_q, points, 2)."""
    if weight.shape[1] != 2 * points:
        raise ValueError(
            f"offset projection must emit {2 * points} values, got {weight.shape[1]}"
        )
    hq, wq, _ = q.shape
    off = linear(q, weight, bias)
    return reshape(off, (hq, wq, points, 2))


def gather_samples(f360: Tensor, p: Tensor, dp: Tensor, proj_w: Tensor) -> Tensor:
    """Bilinear samples at p + dp, linearly projected.

    p is (H_q, W_q, L, 2), dp is (H_q, W_q, L*D, 2); each anchor point
    gets D displaced samples.  Result is (H_q*W_q, L, D, C).
    """
    hq, wq, locs, _ = p.shape
    n_points = dp.shape[2]
    if n_points % locs:
        raise ValueError(f"points ({n_points}) must be a multiple of locs ({locs})")
    depth = n_points // locs
    dp_g = reshape(dp, (hq, wq, locs, depth, 2))
    coords = reshape(p, (hq, wq, locs, 1, 2)) + dp_g
    sampled = bilinear_sample(f360, coords)  # (hq, wq, locs, depth, C)
    projected = linear(sampled, proj_w)
    return reshape(projected, (hq * wq, locs, depth, projected.shape[-1]))


def aggregate(samples: Tensor, query_h: int, query_w: int) -> Tensor:
    """Lay each query's L x D sample block out on a (L*H_q, D*W_q, C) map.

    Pure index permutation; query (i, j) occupies the block with rows
    [i*L, (i+1)*L) and columns [j*D, (j+1)*D).
    """
    n, locs, depth, c = samples.shape
    if n != query_h * query_w:
        raise ValueError(f"expected {query_h * query_w} queries, got {n}")
    grid = reshape(samples, (query_h, query_w, locs, depth, c))
    blocks = transpose(grid, (0, 2, 1, 3, 4))  # (H_q, L, W_q, D, C)
    return reshape(blocks, (query_h * locs, query_w * depth, c))


def patch_embed(agg: Tensor, locs: int, depth: int, weight: Tensor, bias: Tensor) -> Tensor:
    """Re-embed non-overlapping L x D blocks to one vector per query."""
    ah, aw, c = agg.shape
    if ah % locs or aw % depth:
        raise ValueError(
            f"aggregated map {ah}x{aw} is not divisible into {locs}x{depth} blocks"
        )
    hq, wq = ah // locs, aw // depth
    grid = reshape(agg, (hq, locs, wq, depth, c))
    patches = transpose(grid, (0, 2, 1, 3, 4))  # (H_q, W_q, L, D, C)
    flat = reshape(patches, (hq, wq, locs * depth * c))
    return linear(flat, weight, bias)


def _scan_params(lp: Mapping[str, Tensor], mix: str, k: int, state_dim: int) -> ScanParams:
    return ScanParams(
        state_dim=state_dim,
        a=lp[f"{mix}scan{k}.a"],
        b=lp[f"{mix}scan{k}.b"],
        c=lp[f"{mix}scan{k}.c"],
        delta=softplus(lp[f"{mix}scan{k}.d"]),
    )


def view_transform_layer(
    q: Tensor,
    z: Tensor,
    f360: Tensor,
    lp: Mapping[str, Tensor],
    cfg: ModelConfig,
) -> Tensor:
    """One layer: gather -> aggregate -> re-embed -> residual 2-d scans."""
    p = reference_points(z, lp["ref_w"], lp["ref_b"], cfg.locs)
    dp = sampling_offsets(q, lp["off_w"], lp["off_b"], cfg.points)
    samples = gather_samples(f360, p, dp, lp["proj_w"])
    agg = aggregate(samples, cfg.query_h, cfg.query_w)
    x = patch_embed(agg, cfg.locs, cfg.depth_per_loc, lp["pe_w"], lp["pe_b"])
    for d in range(cfg.scan_depth):
        mix = f"mix{d}."
        normed = layer_norm(x, lp[mix + "ln_g"], lp[mix + "ln_b"])
        x = x + scan_2d(normed, [_scan_params(lp, mix, k, cfg.state_dim) for k in range(4)])
    return x


def _patch_stage(x: Tensor, stride: int) -> Tensor:
    h, w, c = x.shape
    if h % stride or w % stride:
        raise ValueError(
            f"feature map {h}x{w} is not divisible by the patch stride {stride}"
        )
    grid = reshape(x, (h // stride, stride, w // stride, stride, c))
    patches = transpose(grid, (0, 2, 1, 3, 4))
    return reshape(patches, (h // stride, w // stride, stride * stride * c))


def encode(image: Tensor, params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """Two strided patch-embedding stages: (H, W, ch) -> (H/16, W/16, C)."""
    image = as_tensor(image)
    if image.ndim != 3:
        raise ValueError(f"encoder input must be (H, W, channels), got {image.shape}")
    x = _patch_stage(image, 4)
    x = linear(x, params["enc.s1_w"], params["enc.s1_b"])
    x = silu(layer_norm(x, params["enc.s1_g"], params["enc.s1_beta"]))
    x = _patch_stage(x, 4)
    x = linear(x, params["enc.s2_w"], params["enc.s2_b"])
    return layer_norm(x, params["enc.s2_g"], params["enc.s2_beta"])


def _split_factor(factor: int) -> tuple[int, int]:
    second = 2 if factor % 2 == 0 else 1
    return factor // second, second


def decode(q: Tensor, params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """Pointwise decoding with nearest upsampling to (out_h, out_w, K)."""
    from .nn.tensor import repeat_axis

    fh, fw = cfg.out_h // cfg.query_h, cfg.out_w // cfg.query_w
    h1, h2 = _split_factor(fh)
    w1, w2 = _split_factor(fw)
    x = silu(linear(q, params["dec.w1"], params["dec.b1"]))
    if h1 > 1:
        x = repeat_axis(x, h1, 0)
    if w1 > 1:
        x = repeat_axis(x, w1, 1)
    x = linear(x, params["dec.w2"], params["dec.b2"])
    if h2 > 1:
        x = repeat_axis(x, h2, 0)
    if w2 > 1:
        x = repeat_axis(x, w2, 1)
    return x


def model_forward(
    params: Mapping[str, Tensor],
    image: Tensor | np.ndarray,
    cfg: ModelConfig,
    features: bool = False,
) -> Tensor:
    """Full forward pass; returns (out_h, out_w, num_classes) logits.

    With features=True the input is taken to be an already-encoded
    (H_f, W_f, emb_dims) panorama feature map.
    """
    x = as_tensor(image)
    if features:
        if x.ndim != 3 or x.shape[-1] != cfg.emb_dims:
            raise ValueError(
                f"feature input must be (H, W, {cfg.emb_dims}), got {x.shape}"
            )
        f360 = x
    else:
        f360 = encode(x, params, cfg)
    q = params["queries"]
    z = params["pos_embed"]
    for i in range(cfg.layers):
        pre = f"layer{i}."
        lp = {k.removeprefix(pre): v for k, v in params.items() if k.startswith(pre)}
        q = view_transform_layer(q, z, f360, lp, cfg)
    logits = decode(q, params, cfg)
    if not np.all(np.isfinite(logits.data)):
        raise FloatingPointError("model produced non-finite logits")
    return logits
