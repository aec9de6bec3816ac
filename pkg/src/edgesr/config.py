"""Run configuration: dataclasses plus a ``section.key = value`` text format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .network import ArchConfig, SCALES
from .objective import PRESETS, LossWeights


@dataclass
class DataConfig:
    patch_lr: int = 32
    batch_size: int = 8
    patches_per_epoch: int = 64


@dataclass
class LossConfig:
    preset: str = "staged"
    lambda_pix: float = 1.0
    lambda_perc_pre: float = 1e-4
    lambda_perc_full: float = 1e-4
    lambda_adv_full: float = 1e-3
    label_smoothing: float = 0.0
    extractor_seed: int = 0


@dataclass
class OptimConfig:
    kind: str = "adam"
    lr: float = 1e-4
    d_lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_epoch: int = 0  # 0: constant learning rates
    decay_factor: float = 0.1


@dataclass
class CannyConfig:
    sigma: float = 1.0
    ksize: int = 5
    low: float = 0.1
    high: float = 0.2
    relative: bool = True


@dataclass
class AblationConfig:
    use_edge_attention: bool = True
    use_pixel_loss: bool = True
    use_perceptual_loss: bool = True
    use_adversarial_loss: bool = True


@dataclass
class TrainConfig:
    scale: int = 4
    seed: int = 0
    epochs_pretrain: int = 20
    epochs_full: int = 80
    data: DataConfig = field(default_factory=DataConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    canny: CannyConfig = field(default_factory=CannyConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)

    def validate(self) -> "TrainConfig":
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {sorted(SCALES)}, got {self.scale}")
        if self.epochs_pretrain < 0 or self.epochs_full < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.data.batch_size < 1 or self.data.patches_per_epoch < 1 or self.data.patch_lr < 1:
            raise ValueError("batch_size, patches_per_epoch and patch_lr must be positive")
        if self.loss.preset not in PRESETS:
            raise ValueError(f"unknown loss preset {self.loss.preset!r}; choose from {sorted(PRESETS)}")
        if self.optim.kind != "adam":
            raise ValueError(f"unsupported optimizer {self.optim.kind!r}")
        if self.optim.decay_epoch < 0 or self.optim.decay_factor <= 0:
            raise ValueError("optim.decay_epoch must be >= 0 and optim.decay_factor > 0")
        if self.arch.edge_attention != self.ablation.use_edge_attention:
            self.arch.edge_attention = self.ablation.use_edge_attention
        return self

    @property
    def epochs_total(self) -> int:
        return self.epochs_pretrain + self.epochs_full

    def weights_for_epoch(self, epoch: int) -> LossWeights:
        """Loss weights in force during ``epoch`` (0-based); adversarial is off while pre-training."""
        full = epoch >= self.epochs_pretrain
        lam = self.loss
        a = self.ablation
        return LossWeights(
            pixel=lam.lambda_pix if a.use_pixel_loss else 0.0,
            perceptual=(lam.lambda_perc_full if full else lam.lambda_perc_pre) if a.use_perceptual_loss else 0.0,
            adversarial=lam.lambda_adv_full if (full and a.use_adversarial_loss) else 0.0,
        )

    def lrs_for_epoch(self, epoch: int) -> tuple[float, float]:
        """(generator, discriminator) learning rates during ``epoch``; one step decay if configured."""
        o = self.optim
        k = o.decay_factor if 0 < o.decay_epoch <= epoch else 1.0
        return o.lr * k, o.d_lr * k

    def to_text(self) -> str:
        return "\n".join(f"{k} = {_format(v)}" for k, v in flatten(self).items()) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def flatten(cfg, prefix: str = "") -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out.update(flatten(v, f"{prefix}{f.name}."))
        else:
            out[prefix + f.name] = v
    return out


def _coerce(raw: str, current, key: str):
    raw = raw.strip()
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {raw!r} as {type(current).__name__}") from None
    return raw


def _set(cfg: TrainConfig, key: str, raw: str) -> None:
    parts = key.split(".")
    target = cfg
    for p in parts[:-1]:
        if not hasattr(target, p) or not dataclasses.is_dataclass(getattr(target, p)):
            raise KeyError(f"unknown config section in {key!r}")
        target = getattr(target, p)
    name = parts[-1]
    if not dataclasses.is_dataclass(target) or name not in {f.name for f in dataclasses.fields(target)}:
        raise KeyError(f"unknown config key {key!r}")
    setattr(target, name, _coerce(str(raw), getattr(target, name), key))


def apply_preset(cfg: TrainConfig, name: str) -> None:
    if name not in PRESETS:
        raise ValueError(f"unknown loss preset {name!r}; choose from {sorted(PRESETS)}")
    perc, adv = PRESETS[name]
    cfg.loss.preset = name
    cfg.loss.lambda_perc_pre = perc
    cfg.loss.lambda_perc_full = perc
    cfg.loss.lambda_adv_full = adv


def parse_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        pairs[k.strip()] = v.strip()
    return pairs


def from_pairs(pairs: Mapping[str, str], base: TrainConfig | None = None) -> TrainConfig:
    """Apply ``key -> value`` strings; a ``loss.preset`` is applied before explicit lambdas."""
    cfg = base if base is not None else TrainConfig()
    if "loss.preset" in pairs:
        apply_preset(cfg, pairs["loss.preset"].strip())
    for k, v in pairs.items():
        if k != "loss.preset":
            _set(cfg, k, v)
    return cfg.validate()


def from_text(text: str, overrides: Mapping[str, str] | None = None) -> TrainConfig:
    pairs = parse_pairs(text)
    pairs.update(overrides or {})
    return from_pairs(pairs)


def load_config(path=None, overrides: Mapping[str, str] | None = None) -> TrainConfig:
    text = Path(path).read_text() if path else ""
    return from_text(text, overrides)
