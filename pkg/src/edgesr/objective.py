"""Pixel, perceptual and adversarial losses and their staged weighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .nn import Module, kaiming_uniform
from .tensor import Tensor, no_grad


@dataclass(frozen=True)
class LossWeights:
    pixel: float = 1.0
    perceptual: float = 1e-4
    adversarial: float = 0.0

    def __post_init__(self):
        for name in ("pixel", "perceptual", "adversarial"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0, got {getattr(self, name)}")


# (perceptual, adversarial) weights of the two shipped presets
PRESETS = {
    "staged": (1e-4, 1e-3),
    "fixed": (1e-3, 1e-2),
}


class FeatureExtractor(Module):
    """Frozen random conv stack used as the perceptual feature space.

    Four stages of conv3x3 -> ReLU -> 2x2 average pool with widths
    3 -> 16 -> 32 -> 64 -> 64.  Weights are drawn once from ``seed`` and
    never receive gradients.  Any object with ``features(x) -> Tensor``
    can replace it (e.g. a pretrained VGG wrapper).
    """

    widths = (3, 16, 32, 64, 64)

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng([seed, 2])
        self._weights = []
        for cin, cout in zip(self.widths[:-1], self.widths[1:]):
            w = kaiming_uniform(rng, (cout, cin, 3, 3), cin * 9)
            self._weights.append((Tensor(w), Tensor(np.zeros(cout, dtype=np.float32))))

    def features(self, x: Tensor) -> Tensor:
        for w, b in self._weights:
            if w.dtype != x.dtype:
                w, b = Tensor(w.data, dtype=x.dtype), Tensor(b.data, dtype=x.dtype)
            x = F.avg_pool2d(F.relu(F.conv2d(x, w, b, padding=1)), 2)
        return x

    def weight_arrays(self) -> list[np.ndarray]:
        return [w.data for w, _ in self._weights]


def pixel_loss(sr: Tensor, hr: Tensor) -> Tensor:
    if sr.shape != hr.shape:
        raise ValueError(f"pixel_loss: SR shape {sr.shape} != HR shape {hr.shape}")
    return F.mse_mean(sr, hr)


def perceptual_loss(extractor, sr: Tensor, hr: Tensor) -> Tensor:
    """Feature-space MSE, normalized by the C*H*W of the feature map (and averaged over the batch)."""
    if sr.shape != hr.shape:
        raise ValueError(f"perceptual_loss: SR shape {sr.shape} != HR shape {hr.shape}")
    if not hr.requires_grad:
        with no_grad():
            target = extractor.features(hr)
    else:
        target = extractor.features(hr)
    return F.mse_mean(extractor.features(sr), target)


def adversarial_loss_generator(d_logits_on_sr: Tensor) -> Tensor:
    """Non-saturating generator loss ``-mean(log sigmoid(logit))``."""
    return F.mean(F.log_sigmoid(d_logits_on_sr)) * -1.0


def adversarial_loss_discriminator(logits_real: Tensor, logits_fake: Tensor, real_target: float = 1.0) -> Tensor:
    """BCE with target ``real_target`` on real images and 0 on generated ones, averaged over both halves."""
    real = F.bce_with_logits(logits_real, real_target)
    fake = F.bce_with_logits(logits_fake, 0.0)
    return (real + fake) * 0.5


def total_loss(weights: LossWeights, l_pix, l_perc, l_adv) -> Tensor:
    """Weighted sum; a component whose weight is zero is left out entirely."""
    terms = [(weights.pixel, l_pix), (weights.perceptual, l_perc), (weights.adversarial, l_adv)]
    out = None
    for w, term in terms:
        if w == 0 or term is None:
            continue
        term = term if isinstance(term, Tensor) else Tensor(np.asarray(term, dtype=np.float32))
        piece = term * w
        out = piece if out is None else out + piece
    if out is None:
        return Tensor(np.zeros((), dtype=np.float32))
    return out
