"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor, backward, no_grad

RTOL = 1e-3
ATOL = 1e-5


@dataclass
class GradCheckResult:
    name: str
    checked: int
    max_abs_err: float
    max_rel_err: float
    ok: bool

    def __str__(self) -> str:
        status = "ok" if self.ok else "FAIL"
        return (f"{self.name:<40s} n={self.checked:<5d} abs={self.max_abs_err:.2e} "
                f"rel={self.max_rel_err:.2e} {status}")


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: Mapping[str, Tensor],
    rng: np.random.Generator | None = None,
    max_per_tensor: int | None = 64,
    eps: float = 1e-6,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> list[GradCheckResult]:
    """Compare backprop gradients of ``loss_fn()`` against central differences.

    ``tensors`` must be float64 leaves with ``requires_grad``.  At most
    ``max_per_tensor`` randomly chosen entries of each tensor are probed
    (all of them when ``None``).  An entry passes when
    ``|analytic - numeric| <= max(rtol * max(|analytic|, |numeric|), atol)``.
    """
    rng = rng or np.random.default_rng(0)
    for t in tensors.values():
        t.grad = None
    loss = loss_fn()
    backward(loss)
    results = []
    for name, t in tensors.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        flat = t.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if max_per_tensor is None or n <= max_per_tensor else rng.choice(n, max_per_tensor, replace=False)
        max_abs = max_rel = 0.0
        ok = True
        for i in idx:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                fp = float(loss_fn().data)
                flat[i] = orig - eps
                fm = float(loss_fn().data)
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            ana = float(analytic.reshape(-1)[i])
            err = abs(ana - num)
            scale = max(abs(ana), abs(num))
            max_abs = max(max_abs, err)
            if scale > 0:
                max_rel = max(max_rel, err / scale)
            if err > max(rtol * scale, atol):
                ok = False
        results.append(GradCheckResult(name, len(idx), max_abs, max_rel, ok))
    return results


def projected_loss(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduce an arbitrary output to a scalar via a fixed random projection."""
    return (out * Tensor(weights, dtype=out.dtype)).sum()


# ---------------------------------------------------------------------------
# named suites (used by the ``gradcheck`` CLI command and the test-suite)


def _leaf(rng: np.random.Generator, *shape, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, shape), requires_grad=True)


def _edges(rng: np.random.Generator, n: int, h: int, w: int) -> Tensor:
    return Tensor((rng.random((n, 1, h, w)) < 0.3).astype(np.float64))


def _params(module) -> dict[str, Tensor]:
    return dict(module.named_parameters())


def _randomize(module, rng: np.random.Generator, scale: float = 0.3) -> None:
    """Replace zero-initialized weights so every path carries gradient."""
    for _, p in module.named_parameters():
        if not np.any(p.data):
            p.data = rng.uniform(-scale, scale, p.shape).astype(p.data.dtype)


def _op_cases(rng: np.random.Generator):
    from . import functional as F

    a, b = _leaf(rng, 2, 3, 4, 4), _leaf(rng, 2, 3, 4, 4)
    row = _leaf(rng, 1, 3, 1, 1)
    pos = _leaf(rng, 2, 3, 4, 4, low=0.5, high=2.0)
    prob = _leaf(rng, 4, 1, low=0.05, high=0.95)
    logits = _leaf(rng, 4, 1, low=-3.0, high=3.0)
    alpha = _leaf(rng, 3, low=0.05, high=0.5)
    x_lin, w_lin, b_lin = _leaf(rng, 3, 5), _leaf(rng, 4, 5), _leaf(rng, 4)
    x8 = _leaf(rng, 2, 3, 6, 6)
    w33 = _leaf(rng, 4, 3, 3, 3)
    w_down = _leaf(rng, 2, 3, 3, 3)
    w11 = _leaf(rng, 5, 3, 1, 1)
    w99 = _leaf(rng, 2, 3, 9, 9)
    bias4, bias2, bias5 = _leaf(rng, 4), _leaf(rng, 2), _leaf(rng, 5)
    gamma, beta = _leaf(rng, 3, low=0.5, high=1.5), _leaf(rng, 3)
    ps = _leaf(rng, 1, 8, 3, 3)
    proj_seed = int(rng.integers(2**32))
    proj: dict[tuple, np.ndarray] = {}

    def pj(out):
        if out.shape not in proj:
            proj[out.shape] = np.random.default_rng([proj_seed, out.size]).standard_normal(out.shape)
        return projected_loss(out, proj[out.shape])

    return {
        "add": (lambda: pj(F.add(a, row)), {"a": a, "row": row}),
        "sub": (lambda: pj(F.sub(a, b)), {"a": a, "b": b}),
        "mul": (lambda: pj(F.mul(a, row)), {"a": a, "row": row}),
        "div": (lambda: pj(F.div(a, pos)), {"a": a, "pos": pos}),
        "power": (lambda: pj(F.power(pos, 1.7)), {"pos": pos}),
        "log": (lambda: pj(F.log(pos)), {"pos": pos}),
        "sum": (lambda: F.sum(a * a), {"a": a}),
        "mean": (lambda: F.mean(a * b), {"a": a, "b": b}),
        "reshape": (lambda: pj(F.reshape(a, (2, 3, 16)) * 1.0), {"a": a}),
        "concat": (lambda: pj(F.concat([a, b], axis=1)), {"a": a, "b": b}),
        "narrow": (lambda: pj(F.narrow(a, 1, 1, 2)), {"a": a}),
        "relu": (lambda: pj(F.relu(a)), {"a": a}),
        "leaky_relu": (lambda: pj(F.leaky_relu(a, 0.2)), {"a": a}),
        "prelu": (lambda: pj(F.prelu(a, alpha)), {"a": a, "alpha": alpha}),
        "sigmoid": (lambda: pj(F.sigmoid(a)), {"a": a}),
        "log_sigmoid": (lambda: pj(F.log_sigmoid(a * 3.0)), {"a": a}),
        "mse_mean": (lambda: F.mse_mean(a, b), {"a": a, "b": b}),
        "bce": (lambda: F.bce(prob, 0.7), {"p": prob}),
        "bce_with_logits": (lambda: F.bce_with_logits(logits, 1.0), {"logits": logits}),
        "linear": (lambda: pj(F.linear(x_lin, w_lin, b_lin)), {"x": x_lin, "w": w_lin, "b": b_lin}),
        "conv2d_3x3": (lambda: pj(F.conv2d(x8, w33, bias4, padding=1)), {"x": x8, "w": w33, "b": bias4}),
        "conv2d_down": (lambda: pj(F.conv2d(x8, w_down, bias2, padding=1)), {"x": x8, "w": w_down, "b": bias2}),
        "conv2d_1x1": (lambda: pj(F.conv2d(x8, w11, bias5)), {"x": x8, "w": w11, "b": bias5}),
        "conv2d_9x9": (lambda: pj(F.conv2d(x8, w99, bias2, padding=4)), {"x": x8, "w": w99}),
        "conv2d_stride2": (lambda: pj(F.conv2d(x8, w33, bias4, stride=2, padding=1)), {"x": x8, "w": w33, "b": bias4}),
        "batch_norm_train": (lambda: pj(F.batch_norm(a, np.zeros(3), np.ones(3), gamma, beta, train=True)),
                             {"a": a, "gamma": gamma, "beta": beta}),
        "batch_norm_eval": (lambda: pj(F.batch_norm(a, np.full(3, 0.1), np.full(3, 0.8), gamma, beta, train=False)),
                            {"a": a, "gamma": gamma, "beta": beta}),
        "global_avg_pool": (lambda: pj(F.global_avg_pool(a)), {"a": a}),
        "avg_pool2d": (lambda: pj(F.avg_pool2d(a, 2)), {"a": a}),
        "pixel_shuffle": (lambda: pj(F.pixel_shuffle(ps, 2)), {"x": ps}),
        "pixel_unshuffle": (lambda: pj(F.pixel_unshuffle(a, 2)), {"a": a}),
        "resize_bilinear": (lambda: pj(F.resize_bilinear(x8, 9, 4)), {"x": x8}),
    }


def _nea_case(rng: np.random.Generator, mode: str = "train"):
    from .network import NeaBlock, nea_forward

    block = NeaBlock(4, 3, rng).astype(np.float64)
    _randomize(block, rng)
    x, e = _leaf(rng, 2, 4, 6, 6), _edges(rng, 2, 6, 6)
    w = rng.standard_normal((2, 4, 6, 6))
    return (lambda: projected_loss(nea_forward(block, x, e, mode), w)), {"x": x, **_params(block)}


def _hybrid_case(rng: np.random.Generator, mode: str = "train"):
    from .network import HybridEdgeResBlock, hybrid_forward

    block = HybridEdgeResBlock(4, 3, rng).astype(np.float64)
    _randomize(block, rng)
    x, e = _leaf(rng, 2, 4, 6, 6), _edges(rng, 2, 3, 3)
    w = rng.standard_normal((2, 4, 6, 6))
    return (lambda: projected_loss(hybrid_forward(block, x, e, mode), w)), {"x": x, **_params(block)}


def _generator_case(rng: np.random.Generator, mode: str = "train"):
    from .network import ArchConfig, Generator, generator_forward

    g = Generator(2, ArchConfig(channels=4, edge_channels=2, blocks=1), rng).astype(np.float64)
    _randomize(g, rng)
    lr, e = _leaf(rng, 2, 3, 6, 6, low=0.0, high=1.0), _edges(rng, 2, 6, 6)
    w = rng.standard_normal((2, 3, 12, 12))
    return (lambda: projected_loss(generator_forward(g, lr, e, mode), w)), {"lr": lr, **_params(g)}


def _discriminator_case(rng: np.random.Generator, mode: str = "train"):
    from .network import ArchConfig, Discriminator, discriminator_forward

    d = Discriminator(ArchConfig(d_base=4, d_max=8, d_blocks=3), rng).astype(np.float64)
    img = _leaf(rng, 2, 3, 32, 32, low=0.0, high=1.0)
    w = rng.standard_normal((2, 1))
    return (lambda: projected_loss(discriminator_forward(d, img, mode), w)), {"img": img, **_params(d)}


def _loss_cases(rng: np.random.Generator):
    from .objective import (FeatureExtractor, LossWeights, adversarial_loss_discriminator,
                            adversarial_loss_generator, perceptual_loss, pixel_loss, total_loss)

    ext = FeatureExtractor(int(rng.integers(1000)))
    sr, hr = _leaf(rng, 1, 3, 16, 16, low=0.0, high=1.0), Tensor(rng.random((1, 3, 16, 16)))
    real, fake = _leaf(rng, 3, 1, low=-2, high=2), _leaf(rng, 3, 1, low=-2, high=2)
    weights = LossWeights(1.0, 0.5, 0.25)
    return {
        "pixel_loss": (lambda: pixel_loss(sr, hr), {"sr": sr}),
        "perceptual_loss": (lambda: perceptual_loss(ext, sr, hr), {"sr": sr}),
        "adversarial_generator": (lambda: adversarial_loss_generator(fake), {"fake": fake}),
        "adversarial_discriminator": (lambda: adversarial_loss_discriminator(real, fake), {"real": real, "fake": fake}),
        "total_loss": (lambda: total_loss(weights, pixel_loss(sr, hr), perceptual_loss(ext, sr, hr),
                                          adversarial_loss_generator(fake)), {"sr": sr, "fake": fake}),
    }


SUITES = ("ops", "losses", "nea", "hybrid", "generator", "discriminator")


def run_suite(name: str, seeds=(0, 1, 2), max_per_tensor: int | None = 24) -> list[GradCheckResult]:
    """Finite-difference check of one named suite, in float64, once per seed."""
    from .tensor import precision

    if name not in SUITES:
        raise ValueError(f"unknown gradcheck suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    with precision(np.float64):
        for seed in seeds:
            rng = np.random.default_rng([seed, 99])
            if name == "ops":
                cases = _op_cases(rng)
            elif name == "losses":
                cases = _loss_cases(rng)
            else:
                builder = {"nea": _nea_case, "hybrid": _hybrid_case,
                           "generator": _generator_case, "discriminator": _discriminator_case}[name]
                cases = {f"{name}[{mode}]": builder(rng, mode) for mode in ("train", "eval")}
            for case, (fn, tensors) in cases.items():
                for r in check_gradients(fn, tensors, rng, max_per_tensor):
                    r.name = f"{case}.{r.name} seed={seed}"
                    results.append(r)
    return results
