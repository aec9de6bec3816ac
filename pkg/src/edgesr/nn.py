"""Layer containers with named parameters and buffers."""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import Tensor


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float32), requires_grad=True)


def kaiming_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def default_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    """Uniform in +-1/sqrt(fan_in), the usual default for conv and linear layers."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Module:
    """Attribute-order registry of parameters, buffers and submodules.

    Parameters are :class:`Tensor` attributes with ``requires_grad``;
    buffers are plain ``np.ndarray`` attributes named in ``_buffers``.
    Lists of modules are traversed with their index as the name segment.
    """

    _buffers: tuple = ()

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, list) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield f"{name}.{i}", v

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, list) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield from v.named_parameters(f"{prefix}{name}.{i}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name in self._buffers:
            yield prefix + name, getattr(self, name)
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state: OrderedDict[str, np.ndarray] = OrderedDict()
        for name, p in self.named_parameters():
            state[name] = p.data
        for name, b in self.named_buffers():
            state[name] = b
        return state

    def load_state_dict(self, state: dict, strict: bool = True) -> None:
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        if strict:
            missing = (set(own) | set(bufs)) - set(state)
            if missing:
                raise KeyError(f"missing tensors in state: {sorted(missing)[:5]}")
        for name, p in own.items():
            if name in state:
                arr = np.asarray(state[name], dtype=p.dtype)
                if arr.shape != p.shape:
                    raise ValueError(f"{name}: shape {arr.shape} does not match {p.shape}")
                p.data = arr.copy()
        for name, b in bufs.items():
            if name in state:
                b[...] = state[name]

    def astype(self, dtype) -> "Module":
        """Cast parameters and buffers in place (used for float64 gradient checks)."""
        for value in vars(self).values():
            if isinstance(value, Tensor) and value.requires_grad:
                value.data = value.data.astype(dtype)
        for name in self._buffers:
            setattr(self, name, getattr(self, name).astype(dtype))
        for _, child in self.children():
            child.astype(dtype)
        return self

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator, stride: int = 1, padding: int | None = None):
        fan_in = cin * k * k
        self.weight = parameter(default_uniform(rng, (cout, cin, k, k), fan_in))
        self.bias = parameter(np.zeros(cout))
        self.stride = stride
        self.padding = k // 2 if padding is None else padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class Linear(Module):
    def __init__(self, fin: int, fout: int, rng: np.random.Generator | None = None, zero: bool = False):
        if zero or rng is None:
            self.weight = parameter(np.zeros((fout, fin)))
        else:
            self.weight = parameter(default_uniform(rng, (fout, fin), fin))
        self.bias = parameter(np.zeros(fout))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class PReLU(Module):
    def __init__(self, channels: int, init: float = 0.25):
        self.alpha = parameter(np.full(channels, init))

    def forward(self, x: Tensor) -> Tensor:
        return F.prelu(x, self.alpha)


class BatchNorm2d(Module):
    """Batch norm with optional learnable affine; running stats are buffers."""

    _buffers = ("running_mean", "running_var")

    def __init__(self, channels: int, affine: bool = True, momentum: float = 0.1, eps: float = 1e-5):
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)
        if affine:
            self.weight = parameter(np.ones(channels))
            self.bias = parameter(np.zeros(channels))
        else:
            self.weight = self.bias = None
        self.momentum = momentum
        self.eps = eps

    def forward(self, x: Tensor, train: bool = True) -> Tensor:
        return F.batch_norm(x, self.running_mean, self.running_var, self.weight, self.bias,
                            train=train, momentum=self.momentum, eps=self.eps)
