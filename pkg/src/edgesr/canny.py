"""Canny edge detection: smoothing, Sobel gradients, thinning, hysteresis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imageio import Image

LUMA = (0.299, 0.587, 0.114)
_T1 = np.pi / 8
_T3 = 3 * np.pi / 8


@dataclass
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray  # radians in (-pi/2, pi/2]


@dataclass
class EdgeMap:
    data: np.ndarray  # {0., 1.}, shape (H, W)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())

    def to_image(self) -> Image:
        return Image(np.repeat(self.data[:, :, None] * 255.0, 3, axis=2))


def to_gray(img: Image | np.ndarray) -> np.ndarray:
    data = img.data if isinstance(img, Image) else np.asarray(img, dtype=np.float64)
    if data.ndim == 2:
        return data.astype(np.float64)
    return LUMA[0] * data[:, :, 0] + LUMA[1] * data[:, :, 1] + LUMA[2] * data[:, :, 2]


def gaussian_kernel(sigma: float, ksize: int) -> np.ndarray:
    if ksize % 2 == 0 or ksize < 1:
        raise ValueError(f"Gaussian kernel size must be odd and positive, got {ksize}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = ksize // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def gaussian_smooth(img: np.ndarray, sigma: float = 1.0, ksize: int = 5) -> np.ndarray:
    """Separable Gaussian blur (rows first, then columns) with edge-clamped borders."""
    g = gaussian_kernel(sigma, ksize)
    r = ksize // 2
    h, w = img.shape
    p = np.pad(np.asarray(img, dtype=np.float64), ((0, 0), (r, r)), mode="edge")
    rows = np.zeros((h, w))
    for k in range(ksize):
        rows = rows + g[k] * p[:, k:k + w]
    p = np.pad(rows, ((r, r), (0, 0)), mode="edge")
    out = np.zeros((h, w))
    for k in range(ksize):
        out = out + g[k] * p[k:k + h, :]
    return out


def sobel_gradients(img: np.ndarray) -> GradientField:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"Sobel needs a 2-D map of at least 3x3, got {img.shape}")
    h, w = img.shape
    p = np.pad(img, 1, mode="edge")
    up, mid, dn = p[0:h], p[1:h + 1], p[2:h + 2]
    gx = (up[:, 2:] - up[:, :-2]) + 2.0 * (mid[:, 2:] - mid[:, :-2]) + (dn[:, 2:] - dn[:, :-2])
    left, ctr, right = p[:, 0:w], p[:, 1:w + 1], p[:, 2:w + 2]
    gy = (left[2:] - left[:-2]) + 2.0 * (ctr[2:] - ctr[:-2]) + (right[2:] - right[:-2])
    mag = np.sqrt(gx * gx + gy * gy)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta > np.pi / 2, theta - np.pi, theta)
    theta = np.where(theta <= -np.pi / 2, theta + np.pi, theta)
    return GradientField(gx, gy, mag, theta)


def direction_bins(theta: np.ndarray) -> np.ndarray:
    """Quantize directions: 0 horizontal, 1 diagonal (down-right), 2 vertical, 3 anti-diagonal."""
    bins = np.full(theta.shape, 2, dtype=np.int8)
    bins[(theta > -_T1) & (theta < _T1)] = 0
    bins[(theta >= _T1) & (theta < _T3)] = 1
    bins[(theta > -_T3) & (theta <= -_T1)] = 3
    return bins


# neighbour offsets (dy, dx) along each quantized gradient direction
_OFFSETS = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}


def non_max_suppression(g: GradientField) -> np.ndarray:
    """Keep magnitudes that are >= both neighbours along the gradient; zero the border."""
    m = g.magnitude
    h, w = m.shape
    bins = direction_bins(g.direction)
    out = np.zeros_like(m)
    if h < 3 or w < 3:
        return out
    inner = m[1:-1, 1:-1]
    keep = np.zeros(inner.shape, dtype=bool)
    for b, (dy, dx) in _OFFSETS.items():
        fwd = m[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        bwd = m[1 - dy:h - 1 - dy, 1 - dx:w - 1 - dx]
        keep |= (bins[1:-1, 1:-1] == b) & (inner >= fwd) & (inner >= bwd)
    out[1:-1, 1:-1] = np.where(keep, inner, 0.0)
    return out


def hysteresis(m: np.ndarray, low: float, high: float) -> EdgeMap:
    """Strong pixels (>= high) plus weak ones (>= low) 8-connected to a strong pixel."""
    if not 0 <= low < high:
        raise ValueError(f"hysteresis thresholds need 0 <= low < high, got low={low}, high={high}")
    strong = m >= high
    candidate = m >= low
    labels, _ = ndimage.label(candidate, structure=np.ones((3, 3), dtype=bool))
    seeds = np.unique(labels[strong])
    seeds = seeds[seeds > 0]
    return EdgeMap(np.isin(labels, seeds).astype(np.float64))


def canny(
    img: Image | np.ndarray,
    sigma: float = 1.0,
    ksize: int = 5,
    low: float = 0.1,
    high: float = 0.2,
    relative: bool = True,
) -> EdgeMap:
    """Binary edge map of an RGB image (or a 2-D grayscale map).

    With ``relative`` the thresholds are fractions of the largest
    gradient magnitude in the image.
    """
    gray = to_gray(img)
    grad = sobel_gradients(gaussian_smooth(gray, sigma, ksize))
    thin = non_max_suppression(grad)
    if relative:
        peak = grad.magnitude.max()
        if peak == 0:
            if not 0 <= low < high:
                raise ValueError(f"hysteresis thresholds need 0 <= low < high, got low={low}, high={high}")
            return EdgeMap(np.zeros(gray.shape))
        low, high = low * peak, high * peak
    return hysteresis(thin, low, high)
