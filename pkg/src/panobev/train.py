"""Deterministic training utilities for the view-transform model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .metrics import ConfusionAccumulator, miou
from .model import ModelConfig, model_forward
from .nn import Tensor, focal_loss

__all__ = ["AdamW", "lr_schedule", "train_toy", "predict_labels", "TrainResult"]


class AdamW(object):
    """Adam with decoupled weight decay; decay applies to matrices only."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ) -> None:
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if weight_decay < 0.0:
            raise ValueError(f"weight decay must be non-negative, got {weight_decay}")
        self.params = dict(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.m = {k: np.zeros_like(t.data) for k, t in self.params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in self.params.items()}
        self.t = 0

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay > 0.0 and p.data.ndim >= 2:
                p.data -= lr * self.weight_decay * p.data


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_steps: int) -> float:
    """Linear warm-up from zero, then cosine annealing back to zero.

    lr(0) = 0, lr(warmup_steps) = base_lr, lr(total_steps) = 0.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be positive, got {total_steps}")
    if not (0 <= warmup_steps < total_steps):
        raise ValueError(
            f"warmup_steps must lie in [0, total_steps), got {warmup_steps}"
        )
    if step < 0 or step > total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * step / warmup_steps
    span = total_steps - warmup_steps
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * (step - warmup_steps) / span))


@dataclass
class TrainResult:
    losses: list[float]
    final_miou: float
    params: dict[str, Tensor] = field(repr=False, default_factory=dict)


def predict_labels(
    params: Mapping[str, Tensor], image: np.ndarray, cfg: ModelConfig
) -> np.ndarray:
    logits = model_forward(params, image, cfg)
    return np.argmax(logits.data, axis=-1).astype(np.uint8)


def train_toy(
    params: Mapping[str, Tensor],
    dataset: Sequence[tuple[np.ndarray, np.ndarray]],
    cfg: ModelConfig,
    steps: int = 500,
    base_lr: float = 4e-3,
    warmup_steps: int = 50,
    weight_decay: float = 0.01,
    gamma: float = 2.0,
    log_every: int = 50,
    on_log: Optional[Callable[[int, float, float], None]] = None,
) -> TrainResult:
    """Overfit the model on a small set of (panorama, label) pairs.

    Samples are visited round-robin, one per step.  Aborts with a
    diagnostic if the loss ever turns non-finite.  Returns the loss
    trace and the training-set mean IoU of the final parameters.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    params = dict(params)
    opt = AdamW(params, weight_decay=weight_decay)
    losses: list[float] = []
    for step in range(steps):
        image, labels = dataset[step % len(dataset)]
        opt.zero_grad()
        logits = model_forward(params, image, cfg)
        loss = focal_loss(logits, labels, gamma=gamma)
        value = loss.item()
        if not math.isfinite(value):
            raise RuntimeError(
                f"training diverged at step {step}: loss is {value} "
                f"(lr={lr_schedule(step, steps, base_lr, warmup_steps):.3e})"
            )
        loss.backward()
        opt.step(lr_schedule(step, steps, base_lr, warmup_steps))
        losses.append(value)
        if on_log is not None and (step % log_every == 0 or step == steps - 1):
            on_log(step, value, lr_schedule(step, steps, base_lr, warmup_steps))

    acc = ConfusionAccumulator(class_ids=tuple(range(cfg.num_classes)))
    for image, labels in dataset:
        acc.add(predict_labels(params, image, cfg), labels)
    return TrainResult(losses=losses, final_miou=miou(acc), params=params)
