"""Edge-attention generator and SRGAN-style discriminator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .nn import BatchNorm2d, Conv2d, Linear, Module, PReLU
from .tensor import Tensor

SCALES = {2: (2,), 3: (3,), 4: (2, 2)}


@dataclass
class ArchConfig:
    channels: int = 64
    edge_channels: int = 32
    blocks: int = 8
    edge_attention: bool = True
    d_base: int = 64
    d_max: int = 512
    d_blocks: int = 8
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5


class EdgeEncoder(Module):
    """conv3x3(1->Ce) + PReLU + conv1x1(Ce->Ce)."""

    def __init__(self, edge_channels: int, rng: np.random.Generator):
        self.conv3 = Conv2d(1, edge_channels, 3, rng)
        self.act = PReLU(edge_channels)
        self.conv1 = Conv2d(edge_channels, edge_channels, 1, rng)

    def forward(self, e: Tensor) -> Tensor:
        return self.conv1(self.act(self.conv3(e)))


def _match_edges(e: Tensor, h: int, w: int) -> Tensor:
    if e.shape[2:] != (h, w):
        return F.resize_bilinear(e, h, w)
    return e


class NeaBlock(Module):
    """Normalized edge attention.

    Pooled edge features predict a per-channel scale/shift applied to the
    batch-normalized input, while a sigmoid spatial map gates the raw
    input.  Both paths are concatenated, fused by a 1x1 conv and added
    back to the input.

    When ``own_encoder`` is false the block expects already-encoded edge
    features (the generator shares one encoder across all blocks).
    """

    def __init__(self, channels: int, edge_channels: int, rng: np.random.Generator,
                 own_encoder: bool = True, bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        self.channels = channels
        self.edge_encoder = EdgeEncoder(edge_channels, rng) if own_encoder else None
        self.film_proj = Linear(edge_channels, 2 * channels, zero=True)
        self.spatial_conv1 = Conv2d(edge_channels, edge_channels, 1, rng)
        self.spatial_act = PReLU(edge_channels)
        self.spatial_conv3 = Conv2d(edge_channels, 1, 3, rng)
        self.bn = BatchNorm2d(channels, affine=False, momentum=bn_momentum, eps=bn_eps)
        self.fusion = Conv2d(2 * channels, channels, 1, rng)

    def encode(self, e: Tensor, h: int, w: int) -> Tensor:
        if self.edge_encoder is None:
            raise ValueError("this NeaBlock has no edge encoder; pass encoded edge features")
        return self.edge_encoder(_match_edges(e, h, w))

    def parts(self, x: Tensor, e: Tensor | None = None, train: bool = True,
              encoded: Tensor | None = None) -> dict:
        """All intermediate maps of one forward pass, keyed by role."""
        n, c, h, w = x.shape
        if c != self.channels:
            raise ValueError(f"NeaBlock built for {self.channels} channels, input has {c}")
        enc = self.encode(e, h, w) if encoded is None else _match_edges(encoded, h, w)
        film = self.film_proj(F.global_avg_pool(enc))
        gamma = F.reshape(F.narrow(film, 1, 0, c), (n, c, 1, 1))
        beta = F.reshape(F.narrow(film, 1, c, c), (n, c, 1, 1))
        attn = F.sigmoid(self.spatial_conv3(self.spatial_act(self.spatial_conv1(enc))))
        normed = self.bn(x, train=train)
        x_norm = normed * (gamma + 1.0) + beta
        x_att = attn * x
        combined = self.fusion(F.concat([x_att, x_norm], axis=1))
        return {"encoded": enc, "gamma": gamma, "beta": beta, "attention": attn, "bn": normed,
                "x_norm": x_norm, "x_att": x_att, "combined": combined, "out": combined + x}

    def forward(self, x: Tensor, e: Tensor | None = None, train: bool = True,
                encoded: Tensor | None = None) -> Tensor:
        return self.parts(x, e, train, encoded)["out"]


class PlainNormBlock(Module):
    """Ablation stand-in for :class:`NeaBlock`: ``x + BN(x)``, no edge input."""

    def __init__(self, channels: int, bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        self.channels = channels
        self.bn = BatchNorm2d(channels, affine=False, momentum=bn_momentum, eps=bn_eps)

    def forward(self, x: Tensor, e: Tensor | None = None, train: bool = True,
                encoded: Tensor | None = None) -> Tensor:
        return x + self.bn(x, train=train)


class HybridEdgeResBlock(Module):
    """conv -> NEA -> PReLU -> conv -> NEA, wrapped in an outer residual."""

    def __init__(self, channels: int, edge_channels: int, rng: np.random.Generator,
                 edge_attention: bool = True, own_encoder: bool = True,
                 bn_momentum: float = 0.1, bn_eps: float = 1e-5):
        def inner():
            if edge_attention:
                return NeaBlock(channels, edge_channels, rng, own_encoder, bn_momentum, bn_eps)
            return PlainNormBlock(channels, bn_momentum, bn_eps)

        self.conv1 = Conv2d(channels, channels, 3, rng)
        self.hybrid1 = inner()
        self.act = PReLU(channels)
        self.conv2 = Conv2d(channels, channels, 3, rng)
        self.hybrid2 = inner()

    def forward(self, x: Tensor, e: Tensor | None = None, train: bool = True,
                encoded: Tensor | None = None) -> Tensor:
        x1 = self.hybrid1(self.conv1(x), e, train, encoded)
        x2 = self.act(x1)
        x3 = self.hybrid2(self.conv2(x2), e, train, encoded)
        return x + x3


class UpsampleStage(Module):
    def __init__(self, channels: int, r: int, rng: np.random.Generator):
        self.r = r
        self.conv = Conv2d(channels, channels * r * r, 3, rng)
        self.act = PReLU(channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.act(F.pixel_shuffle(self.conv(x), self.r))


class Generator(Module):
    def __init__(self, scale: int, arch: ArchConfig, rng: np.random.Generator):
        if scale not in SCALES:
            raise ValueError(f"scale must be one of {sorted(SCALES)}, got {scale}")
        c, ce = arch.channels, arch.edge_channels
        self.scale = scale
        self.edge_attention = arch.edge_attention
        self.edge_processor = EdgeEncoder(ce, rng) if arch.edge_attention else None
        self.head = Conv2d(3, c, 9, rng)
        self.head_act = PReLU(c)
        self.blocks = [
            HybridEdgeResBlock(c, ce, rng, arch.edge_attention, own_encoder=False,
                               bn_momentum=arch.bn_momentum, bn_eps=arch.bn_eps)
            for _ in range(arch.blocks)
        ]
        self.skip_conv = Conv2d(c, c, 3, rng)
        self.skip_bn = BatchNorm2d(c, momentum=arch.bn_momentum, eps=arch.bn_eps)
        self.upsample = [UpsampleStage(c, r, rng) for r in SCALES[scale]]
        self.tail = Conv2d(c, 3, 9, rng)

    def forward(self, lr: Tensor, edge: Tensor | None, train: bool = True) -> Tensor:
        n, _, h, w = lr.shape
        encoded = None
        if self.edge_processor is not None:
            if edge is None or edge.shape != (n, 1, h, w):
                got = None if edge is None else edge.shape
                raise ValueError(f"edge map must have shape {(n, 1, h, w)} to match the LR input, got {got}")
            encoded = self.edge_processor(edge)
        f0 = self.head_act(self.head(lr))
        feat = f0
        for block in self.blocks:
            feat = block(feat, None, train, encoded)
        feat = feat + self.skip_bn(self.skip_conv(f0), train=train)
        for stage in self.upsample:
            feat = stage(feat)
        return self.tail(feat)


class Discriminator(Module):
    """Strided VGG-style stack, global average pool and a single logit.

    Block ``i`` has ``min(d_base * 2**(i // 2), d_max)`` channels and
    stride 2 on odd indices; blocks after the first are batch-normalized.
    """

    min_size = 32

    def __init__(self, arch: ArchConfig, rng: np.random.Generator):
        self.convs = []
        self.norms = []
        cin = 3
        for i in range(arch.d_blocks):
            cout = min(arch.d_base * 2 ** (i // 2), arch.d_max)
            self.convs.append(Conv2d(cin, cout, 3, rng, stride=2 if i % 2 else 1))
            if i > 0:
                self.norms.append(BatchNorm2d(cout, momentum=arch.bn_momentum, eps=arch.bn_eps))
            cin = cout
        self.head = Linear(cin, 1, rng)

    def forward(self, img: Tensor, train: bool = True) -> Tensor:
        h, w = img.shape[2:]
        if h < self.min_size or w < self.min_size:
            raise ValueError(f"discriminator input {h}x{w} is below the {self.min_size}x{self.min_size} minimum")
        x = img
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i > 0:
                x = self.norms[i - 1](x, train=train)
            x = F.leaky_relu(x, 0.2)
        return self.head(F.global_avg_pool(x))


@dataclass
class ModelParams:
    generator: Generator
    discriminator: Discriminator | None


def init_params(rng_seed: int, scale: int = 4, arch: ArchConfig | None = None,
                with_discriminator: bool = True) -> ModelParams:
    """Build freshly initialized networks; identical seeds give identical weights."""
    arch = arch or ArchConfig()
    g = Generator(scale, arch, np.random.default_rng([rng_seed, 0]))
    d = Discriminator(arch, np.random.default_rng([rng_seed, 1])) if with_discriminator else None
    return ModelParams(g, d)


def count_params(params: ModelParams | Module) -> int:
    if isinstance(params, Module):
        return params.num_params()
    total = params.generator.num_params()
    if params.discriminator is not None:
        total += params.discriminator.num_params()
    return total


def generator_forward(g: Generator, lr: Tensor, edge: Tensor | None, mode: str = "train") -> Tensor:
    return g(lr, edge, train=_train(mode))


def discriminator_forward(d: Discriminator, img: Tensor, mode: str = "train") -> Tensor:
    return d(img, train=_train(mode))


def nea_forward(block: NeaBlock, x: Tensor, e: Tensor, mode: str = "train") -> Tensor:
    return block(x, e, train=_train(mode))


def hybrid_forward(block: HybridEdgeResBlock, x: Tensor, e: Tensor, mode: str = "train") -> Tensor:
    return block(x, e, train=_train(mode))


def _train(mode: str) -> bool:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return mode == "train"
