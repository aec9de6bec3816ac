"""Image I/O, bicubic degradation and training patch sampling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from .tensor import Tensor

IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass
class Image:
    """RGB pixels as reals in [0, 255], shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"image data must be H x W x 3, got {self.data.shape}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if self.data.min() < 0 or self.data.max() > 255:
            raise ValueError("image values must lie in [0, 255]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def crop(self, top: int, left: int, h: int, w: int) -> "Image":
        return Image(self.data[top:top + h, left:left + w])


@dataclass
class PatchPair:
    lr: Image
    hr: Image
    scale: int


def quantize(data: np.ndarray) -> np.ndarray:
    """Round half up and clip to 8 bits."""
    return np.clip(np.floor(np.asarray(data, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# file formats


def _read_ppm(raw: bytes, path: Path) -> np.ndarray:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PPM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P6":
        raise ValueError(f"{path}: unsupported PPM variant {tokens[0]!r} (only binary P6)")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise ValueError(f"{path}: PPM maxval {maxval} unsupported (need 255)")
    need = w * h * 3
    body = raw[pos:pos + need]
    if len(body) != need:
        raise ValueError(f"{path}: truncated PPM payload ({len(body)} of {need} bytes)")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


def load_image(path) -> Image:
    """Read a PNG or binary PPM (P6) file as an RGB :class:`Image`."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"P6" or raw[:1] == b"P" and path.suffix.lower() == ".ppm":
        return Image(_read_ppm(raw, path).astype(np.float64))
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            with PILImage.open(path) as im:
                im.load()
                arr = np.asarray(im.convert("RGB"))
        except (OSError, SyntaxError) as exc:
            raise ValueError(f"{path}: unreadable PNG ({exc})") from exc
        return Image(arr.astype(np.float64))
    raise ValueError(f"{path}: unsupported image format (expected PNG or PPM P6)")


def save_image(img: Image, path) -> None:
    path = Path(path)
    pixels = quantize(img.data)
    if path.suffix.lower() == ".ppm":
        h, w, _ = pixels.shape
        path.write_bytes(f"P6\n{w} {h}\n255\n".encode() + pixels.tobytes())
    elif path.suffix.lower() == ".png":
        PILImage.fromarray(pixels, "RGB").save(path)
    else:
        raise ValueError(f"{path}: unsupported output format (use .png or .ppm)")


def list_images(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


# ---------------------------------------------------------------------------
# resampling


def cubic_kernel(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic convolution kernel; ``a = -0.5`` is Catmull-Rom."""
    x = np.abs(x)
    x2, x3 = x * x, x * x * x
    return np.where(
        x <= 1,
        (a + 2) * x3 - (a + 3) * x2 + 1,
        np.where(x < 2, a * x3 - 5 * a * x2 + 8 * a * x - 4 * a, 0.0),
    )


def resize_weights(n_in: int, n_out: int) -> np.ndarray:
    """``(n_out, n_in)`` bicubic interpolation matrix.

    Sample centers are aligned on pixel centers.  When shrinking, the
    kernel is stretched by the reduction factor so it also low-passes.
    Taps falling outside the source are clamped to the border pixel, and
    each row is normalized to sum to one.
    """
    scale = n_out / n_in
    stretch = 1.0 / scale if scale < 1 else 1.0
    support = 2.0 * stretch
    m = np.zeros((n_out, n_in), dtype=np.float64)
    for o in range(n_out):
        center = (o + 0.5) / scale - 0.5
        lo = int(math.floor(center - support)) + 1
        hi = int(math.ceil(center + support))
        idx = np.arange(lo, hi)
        w = cubic_kernel((center - idx) / stretch)
        np.add.at(m[o], np.clip(idx, 0, n_in - 1), w)
        m[o] /= m[o].sum()
    return m


def bicubic_resize(img: Image, out_h: int, out_w: int) -> Image:
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    if (out_h, out_w) == (img.height, img.width):
        return Image(img.data.copy())
    wy = resize_weights(img.height, out_h)
    wx = resize_weights(img.width, out_w)
    out = np.einsum("oh,hwc,pw->opc", wy, img.data, wx, optimize=True)
    return Image(np.clip(out, 0.0, 255.0))


# ---------------------------------------------------------------------------
# patches and tensors


def sample_patch_pairs(
    hr_images: Sequence[Image],
    scale: int,
    count: int,
    rng_seed: int | np.random.Generator = 0,
    patch_lr: int = 32,
) -> list[PatchPair]:
    """Random aligned (LR, HR) crops; the LR side is the bicubic shrink of the HR crop."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    side = patch_lr * scale
    usable = []
    for i, img in enumerate(hr_images):
        if img.height < side or img.width < side:
            warnings.warn(f"image {i} ({img.height}x{img.width}) smaller than {side}x{side} patch; skipped")
        else:
            usable.append(img)
    if not usable:
        raise ValueError(f"no image is at least {side}x{side}; cannot sample scale-{scale} patches")
    pairs = []
    for _ in range(count):
        img = usable[int(rng.integers(len(usable)))]
        top = int(rng.integers(img.height - side + 1))
        left = int(rng.integers(img.width - side + 1))
        hr = img.crop(top, left, side, side)
        pairs.append(PatchPair(bicubic_resize(hr, patch_lr, patch_lr), hr, scale))
    return pairs


def to_tensor(img: Image | Sequence[Image]) -> Tensor:
    """Image(s) in [0, 255] to an N,3,H,W tensor in [0, 1]."""
    imgs = [img] if isinstance(img, Image) else list(img)
    arr = np.stack([i.data.transpose(2, 0, 1) for i in imgs]) / 255.0
    return Tensor(arr.astype(np.float32))


def from_tensor(t: Tensor | np.ndarray, index: int = 0) -> Image:
    """Inverse of :func:`to_tensor`: clip to [0, 1] and quantize to 8-bit levels."""
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if arr.ndim == 4:
        arr = arr[index]
    arr = np.clip(arr.astype(np.float64), 0.0, 1.0).transpose(1, 2, 0)
    return Image(quantize(arr * 255.0).astype(np.float64))
