"""PSNR and Gaussian-window SSIM, both computed on RGB in [0, 255]."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imageio import Image, list_images, load_image

MAX_VALUE = 255.0


def _as_array(img) -> np.ndarray:
    return np.asarray(img.data if isinstance(img, Image) else img, dtype=np.float64)


def psnr(a, b, max_value: float = MAX_VALUE) -> float:
    """PSNR in dB over all RGB values; identical inputs give ``inf``."""
    x, y = _as_array(a), _as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"psnr: image dims differ {x.shape} vs {y.shape}")
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = sliding_window_view(x, k, axis=0) @ g          # (H-k+1, W)
    return sliding_window_view(rows, k, axis=1) @ g      # (H-k+1, W-k+1)


def ssim_map(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5,
             k1: float = 0.01, k2: float = 0.03, data_range: float = MAX_VALUE) -> np.ndarray:
    """Local SSIM of two single-channel maps over the valid window positions."""
    g = gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_x = _filter_valid(x, g)
    mu_y = _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x * mu_x
    syy = _filter_valid(y * y, g) - mu_y * mu_y
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(a, b, window: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03,
         data_range: float = MAX_VALUE) -> float:
    """Mean SSIM: per-channel maps averaged over space, then over channels."""
    x, y = _as_array(a), _as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"ssim: image dims differ {x.shape} vs {y.shape}")
    if x.ndim == 2:
        x, y = x[:, :, None], y[:, :, None]
    if x.shape[0] < window or x.shape[1] < window:
        raise ValueError(f"ssim: image {x.shape[0]}x{x.shape[1]} smaller than the {window}x{window} window")
    per_channel = [ssim_map(x[:, :, c], y[:, :, c], window, sigma, k1, k2, data_range).mean()
                   for c in range(x.shape[2])]
    return float(np.mean(per_channel))


@dataclass
class MetricReport:
    per_image: list = field(default_factory=list)  # (name, psnr_db, ssim)

    @property
    def psnr_db(self) -> float:
        finite = [p for _, p, _ in self.per_image if math.isfinite(p)]
        if finite:
            return float(np.mean(finite))
        return math.inf if self.per_image else math.nan

    @property
    def ssim(self) -> float:
        return float(np.mean([s for _, _, s in self.per_image])) if self.per_image else math.nan

    @property
    def infinite_count(self) -> int:
        return sum(1 for _, p, _ in self.per_image if not math.isfinite(p))

    def table(self) -> str:
        width = max([len("name")] + [len(n) for n, _, _ in self.per_image])
        lines = [f"{'name':<{width}}  {'psnr_db':>9}  {'ssim':>8}"]
        for name, p, s in self.per_image:
            lines.append(f"{name:<{width}}  {p:>9.4f}  {s:>8.5f}" if math.isfinite(p)
                         else f"{name:<{width}}  {'inf':>9}  {s:>8.5f}")
        mean_p = f"{self.psnr_db:>9.4f}" if math.isfinite(self.psnr_db) else f"{'inf':>9}"
        lines.append(f"{'mean':<{width}}  {mean_p}  {self.ssim:>8.5f}")
        if self.infinite_count:
            lines.append(f"({self.infinite_count} identical pair(s) with infinite PSNR excluded from the PSNR mean)")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "psnr_db", "ssim"])
            for name, p, s in self.per_image:
                writer.writerow([name, "inf" if not math.isfinite(p) else repr(p), repr(s)])


class MissingCounterpart(ValueError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__("no counterpart for: " + ", ".join(missing))


def evaluate_dir(sr_dir, hr_dir) -> MetricReport:
    """Pair images by file name and score each SR image against its HR reference."""
    sr_files = {p.name: p for p in list_images(sr_dir)}
    hr_files = {p.name: p for p in list_images(hr_dir)}
    missing = sorted(set(sr_files) ^ set(hr_files))
    if missing:
        raise MissingCounterpart(missing)
    report = MetricReport()
    for name in sorted(sr_files):
        a, b = load_image(sr_files[name]), load_image(hr_files[name])
        report.per_image.append((name, psnr(a, b), ssim(a, b)))
    return report
