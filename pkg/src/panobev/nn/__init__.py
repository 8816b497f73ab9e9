"""Minimal reverse-mode autodiff with the handful of ops the model needs."""

from .tensor import Tensor, as_tensor
from .ops import (
    bilinear_sample,
    focal_loss,
    layer_norm,
    linear,
    log_softmax,
    sigmoid,
    silu,
    softmax,
    softplus,
)
from .scan import ScanParams, scan_2d, selective_scan
from .gradcheck import grad_check, grad_check_suite
from .serialize import (
    load_checkpoint,
    load_tensor,
    save_checkpoint,
    save_tensor,
)

__all__ = [
    "Tensor",
    "as_tensor",
    "linear",
    "sigmoid",
    "silu",
    "softplus",
    "softmax",
    "log_softmax",
    "layer_norm",
    "bilinear_sample",
    "focal_loss",
    "ScanParams",
    "selective_scan",
    "scan_2d",
    "grad_check",
    "grad_check_suite",
    "save_tensor",
    "load_tensor",
    "save_checkpoint",
    "load_checkpoint",
]
