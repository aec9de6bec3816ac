"""Procedural HR images (flat regions, sharp shapes, stripes) for smoke runs and tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imageio import Image, quantize, save_image


def _color(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0, 255, 3)


def _span(n: int) -> tuple[int, int]:
    lo = max(1, min(10, n // 4))
    return lo, max(lo + 1, n // 2)


def synthetic_image(rng: np.random.Generator, height: int = 160, width: int = 160) -> Image:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    # smooth two-colour gradient background
    angle = rng.uniform(0, 2 * np.pi)
    t = (np.cos(angle) * xx + np.sin(angle) * yy)
    t = (t - t.min()) / max(np.ptp(t), 1.0)
    c0, c1 = _color(rng), _color(rng)
    img = c0 + t[:, :, None] * (c1 - c0)

    for _ in range(rng.integers(4, 9)):
        kind = rng.integers(4)
        col = _color(rng)
        if kind == 0:  # axis-aligned rectangle
            h, w = rng.integers(*_span(height)), rng.integers(*_span(width))
            top, left = rng.integers(0, height - h), rng.integers(0, width - w)
            mask = (yy >= top) & (yy < top + h) & (xx >= left) & (xx < left + w)
        elif kind == 1:  # disc
            r = rng.uniform(min(6, min(height, width) / 8), min(height, width) / 4)
            cy, cx = rng.uniform(0, height), rng.uniform(0, width)
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        elif kind == 2:  # oriented stripes inside a band
            a = rng.uniform(0, np.pi)
            period = rng.uniform(4, 14)
            u = np.cos(a) * xx + np.sin(a) * yy
            v = -np.sin(a) * xx + np.cos(a) * yy
            centre = rng.uniform(v.min(), v.max())
            mask = (np.abs(v - centre) < rng.uniform(8, 30)) & ((u % period) < period / 2)
        else:  # half-plane
            a = rng.uniform(0, 2 * np.pi)
            off = rng.uniform(-0.3, 0.3) * (height + width) / 2
            mask = np.cos(a) * (xx - width / 2) + np.sin(a) * (yy - height / 2) > off
        img = np.where(mask[:, :, None], col, img)
    return Image(quantize(np.clip(img, 0, 255)).astype(np.float64))


def synthetic_corpus(count: int, seed: int = 0, height: int = 160, width: int = 160) -> list[Image]:
    rng = np.random.default_rng(seed)
    return [synthetic_image(rng, height, width) for _ in range(count)]


def write_corpus(directory, count: int, seed: int = 0, height: int = 160, width: int = 160) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(synthetic_corpus(count, seed, height, width)):
        p = directory / f"img_{i:03d}.png"
        save_image(img, p)
        paths.append(p)
    return paths
