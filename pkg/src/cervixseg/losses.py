"""Composite multi-task loss: BCE/Dice segmentation mix plus weighted BCE
classification, combined additively.

total = seg + cls
seg   = alpha * BCE(mask, seg_probs) + (1 - alpha) * DiceLoss(mask, seg_probs)
cls   = beta * BCE_w(label, cls_probs)   (pos_weight w on the positive class)

BCE uses the conventional negated form, mean of -[w y log p + (1-y) log(1-p)];
probabilities are clamped to [1e-7, 1 - 1e-7] before the logs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ConfigError

__all__ = ["LossWeights", "bce", "dice_loss", "total_loss", "PROB_CLAMP"]

PROB_CLAMP = 1e-7


@dataclass
class LossWeights:
    """Mixing weights of the composite loss."""

    alpha: float = 0.5  # BCE share of the segmentation loss
    beta: float = 0.8  # classification loss scale
    pos_weight: float = 1.0  # weight of the under-represented (preterm) class
    epsilon: float = 1e-6  # Dice denominator stabilizer

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha: need a value in [0, 1], got {self.alpha}")
        if self.beta < 0.0:
            raise ConfigError(f"beta: need >= 0, got {self.beta}")
        if self.pos_weight <= 0.0:
            raise ConfigError(f"pos_weight: need > 0, got {self.pos_weight}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon: need > 0, got {self.epsilon}")


def _pair(y, p) -> tuple[torch.Tensor, torch.Tensor]:
    y = torch.as_tensor(y)
    p = torch.as_tensor(p)
    if y.shape != p.shape:
        raise ValueError(f"target shape {tuple(y.shape)} != prediction shape {tuple(p.shape)}")
    return y, p


def bce(y, p, pos_weight: float = 1.0) -> torch.Tensor:
    """Mean binary cross-entropy with an optional positive-class weight."""
    y, p = _pair(y, p)
    p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(pos_weight * y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p)).mean()


def dice_loss(y, p, epsilon: float = 1e-6) -> torch.Tensor:
    """1 - 2*sum(y p) / (sum(y^2) + sum(p^2) + epsilon), over all elements."""
    y, p = _pair(y, p)
    y = y.to(p.dtype) if p.is_floating_point() else y.double()
    num = 2.0 * (y * p).sum()
    den = (y * y).sum() + (p * p).sum() + epsilon
    return 1.0 - num / den


def total_loss(
    seg_target,
    seg_probs,
    cls_target,
    cls_probs,
    weights: LossWeights,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, seg_component, cls_component); total is exactly their sum."""
    seg_component = weights.alpha * bce(seg_target, seg_probs) + (
        1.0 - weights.alpha
    ) * dice_loss(seg_target, seg_probs, epsilon=weights.epsilon)
    cls_component = weights.beta * bce(cls_target, cls_probs, pos_weight=weights.pos_weight)
    return seg_component + cls_component, seg_component, cls_component
