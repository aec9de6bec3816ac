"""A small training run on a generated corpus, compared with bicubic.

Run from the repository root:  python3 demos/03_desk_training.py
Takes about five minutes on one CPU core. At this length (about 1000 steps) the model is still
below bicubic; the acceptance protocol trains ten times longer (80+2 epochs of 1024 patches)
and ends above it.
"""
from pathlib import Path

import numpy as np

from edgesr import harness
from edgesr.config import from_pairs
from edgesr.imageio import sample_patch_pairs
from edgesr.synthetic import synthetic_corpus

out = Path(__file__).parent / "out" / "desk_run"

images = synthetic_corpus(40, seed=1)
train, held_out = images[:32], images[32:]

config = from_pairs({
    "scale": "4",
    "epochs_pretrain": "30", "epochs_full": "2",
    "data.patch_lr": "16", "data.batch_size": "8", "data.patches_per_epoch": "256",
    "arch.channels": "16", "arch.edge_channels": "8", "arch.blocks": "2",
    "arch.d_base": "8", "arch.d_blocks": "4",
    "optim.lr": "1e-3", "optim.d_lr": "1e-3", "optim.decay_epoch": "28",
})
final = harness.train(config, None, out, hr_images=train)

log = harness.read_log(out / harness.LOG_NAME)
for epoch in (0, config.epochs_pretrain - 1, config.epochs_total - 1):
    rows = log[log[:, 0] == epoch]
    print(f"epoch {epoch:3d}  l_pix {rows[:, 2].mean():.5f}  d_loss {rows[:, 6].mean():.4f}  lam_adv {rows[0, 9]:g}")

g, cfg = harness.load_generator(final)
pairs = sample_patch_pairs(held_out, cfg.scale, 32, np.random.default_rng(123), cfg.data.patch_lr)
score = harness.evaluate_pairs(g, pairs, cfg.canny)
print(f"held-out PSNR  model {score.model_psnr:.2f} dB  bicubic {score.bicubic_psnr:.2f} dB  margin {score.margin:+.2f}")
