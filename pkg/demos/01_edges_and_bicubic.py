"""Edge maps and the bicubic baseline on one generated image.

Run from the repository root:  python3 demos/01_edges_and_bicubic.py
"""
from pathlib import Path

import numpy as np

from edgesr.canny import canny, gaussian_smooth, non_max_suppression, sobel_gradients, to_gray
from edgesr.imageio import bicubic_resize, save_image
from edgesr.metrics import psnr, ssim
from edgesr.synthetic import synthetic_image

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

hr = synthetic_image(np.random.default_rng(42), 160, 160)
save_image(hr, out / "hr.png")

# Canny, one stage at a time
gray = to_gray(hr.data)
smooth = gaussian_smooth(gray, sigma=1.0, ksize=5)
grad = sobel_gradients(smooth)
thin = non_max_suppression(grad)
print("gradient peak     ", round(float(grad.magnitude.max()), 1))
print("pixels after NMS  ", int((thin > 0).sum()), "of", thin.size)

# thresholds are fractions of the peak by default
for low, high in [(0.05, 0.1), (0.1, 0.2), (0.2, 0.4)]:
    e = canny(hr, low=low, high=high)
    print(f"low={low:<4} high={high:<4} -> {e.count():5d} edge pixels")
save_image(canny(hr).to_image(), out / "hr_edges.png")

# x4 degradation and the bicubic baseline
lr = bicubic_resize(hr, 40, 40)
up = bicubic_resize(lr, 160, 160)
save_image(lr, out / "lr.png")
save_image(up, out / "bicubic_x4.png")
print("bicubic x4  PSNR %.2f dB  SSIM %.4f" % (psnr(up, hr), ssim(up, hr)))

# edges as the generator sees them: computed on the LR input
lr_edges = canny(lr)
print("LR edge pixels", lr_edges.count(), "on", lr.height, "x", lr.width)
save_image(lr_edges.to_image(), out / "lr_edges.png")
