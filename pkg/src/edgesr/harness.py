"""Two-stage adversarial training, resumable state, ablations and inference."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint
from .canny import canny
from .config import CannyConfig, TrainConfig, from_text
from .imageio import (
    Image,
    PatchPair,
    bicubic_resize,
    from_tensor,
    list_images,
    load_image,
    quantize,
    sample_patch_pairs,
    save_image,
    to_tensor,
)
from .metrics import psnr
from .network import Discriminator, Generator
from .objective import (
    FeatureExtractor,
    adversarial_loss_discriminator,
    adversarial_loss_generator,
    perceptual_loss,
    pixel_loss,
    total_loss,
)
from .optim import Adam
from .tensor import Tensor, backward, no_grad

STATE_NAME = "state.eatsr"
FINAL_NAME = "final.eatsr"
LOG_NAME = "train.log"
LOG_COLUMNS = ("epoch", "step", "l_pix", "l_perc", "l_adv", "l_total", "d_loss", "lam_pix", "lam_perc", "lam_adv")

VARIANTS = {
    "no_edge_attention": "use_edge_attention",
    "no_pixel": "use_pixel_loss",
    "no_perceptual": "use_perceptual_loss",
    "no_adversarial": "use_adversarial_loss",
}


class TrainingError(RuntimeError):
    """Data or I/O problem that prevents training from starting or continuing."""


# ---------------------------------------------------------------------------
# data helpers


def load_dataset(hr_dir) -> list[Image]:
    hr_dir = Path(hr_dir)
    if not hr_dir.is_dir():
        raise TrainingError(f"data directory {hr_dir} does not exist")
    paths = list_images(hr_dir)
    if not paths:
        raise TrainingError(f"data directory {hr_dir} contains no .png/.ppm images")
    return [load_image(p) for p in paths]


def edge_tensor(lr_images: Sequence[Image], params: CannyConfig) -> Tensor:
    maps = [canny(img, params.sigma, params.ksize, params.low, params.high, params.relative).data for img in lr_images]
    return Tensor(np.stack(maps)[:, None].astype(np.float32))


def _prepare_out_dir(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise TrainingError(f"checkpoint directory {out_dir} is not writable: {exc}") from None


# ---------------------------------------------------------------------------
# training state


@dataclass
class TrainState:
    config: TrainConfig
    generator: Generator
    discriminator: Discriminator | None
    g_opt: Adam
    d_opt: Adam | None
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0
    data_dir: str = ""
    history: list = field(default_factory=list)  # per-epoch mean of (l_pix, l_perc, l_adv, l_total, d_loss)

    @classmethod
    def fresh(cls, config: TrainConfig, data_dir: str = "") -> "TrainState":
        config.validate()
        seed = config.seed
        g = Generator(config.scale, config.arch, np.random.default_rng([seed, 0]))
        d = None
        if config.ablation.use_adversarial_loss and config.loss.lambda_adv_full > 0:
            d = Discriminator(config.arch, np.random.default_rng([seed, 1]))
        o = config.optim
        g_opt = Adam(g.named_parameters(), o.lr, (o.beta1, o.beta2), o.eps)
        d_opt = Adam(d.named_parameters(), o.d_lr, (o.beta1, o.beta2), o.eps) if d is not None else None
        return cls(config, g, d, g_opt, d_opt, np.random.default_rng([seed, 3]), data_dir=data_dir)

    @property
    def done(self) -> bool:
        return self.epoch >= self.config.epochs_total

    def tensors(self) -> dict[str, np.ndarray]:
        out = {f"G.{k}": v for k, v in self.generator.state_dict().items()}
        if self.discriminator is not None:
            out.update({f"D.{k}": v for k, v in self.discriminator.state_dict().items()})
        return out

    def encode(self) -> bytes:
        moments = dict(self.g_opt.state_arrays("G."))
        if self.d_opt is not None:
            moments.update(self.d_opt.state_arrays("D."))
        stat = {
            "epoch": self.epoch,
            "step": self.step,
            "g_opt_t": self.g_opt.t,
            "d_opt_t": self.d_opt.t if self.d_opt is not None else 0,
            "rng": self.rng.bit_generator.state,
            "data_dir": self.data_dir,
            "history": self.history,
        }
        sections = {
            b"CONF": self.config.to_text().encode("utf-8"),
            b"STAT": json.dumps(stat, sort_keys=True).encode("utf-8"),
            b"OPTM": checkpoint.encode_tensors(moments),
        }
        return checkpoint.encode(self.tensors(), sections)

    def save(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(self.encode())
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "TrainState":
        tensors, sections = checkpoint.load(path)
        for tag in (b"CONF", b"STAT", b"OPTM"):
            if tag not in sections:
                raise checkpoint.CheckpointError(f"{path}: missing {tag.decode()} section; not a training state")
        config = from_text(sections[b"CONF"].decode("utf-8"))
        state = cls.fresh(config)
        state.generator.load_state_dict(_strip(tensors, "G."))
        if state.discriminator is not None:
            state.discriminator.load_state_dict(_strip(tensors, "D."))
        stat = json.loads(sections[b"STAT"].decode("utf-8"))
        moments = checkpoint.decode_tensors(sections[b"OPTM"])
        state.g_opt.load_state_arrays(moments, stat["g_opt_t"], "G.")
        if state.d_opt is not None:
            state.d_opt.load_state_arrays(moments, stat["d_opt_t"], "D.")
        state.rng.bit_generator.state = stat["rng"]
        state.epoch = stat["epoch"]
        state.step = stat["step"]
        state.data_dir = stat.get("data_dir", "")
        state.history = stat.get("history", [])
        return state


def _strip(tensors, prefix: str) -> dict[str, np.ndarray]:
    return {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}


# ---------------------------------------------------------------------------
# the loop


def _fmt(v: float) -> str:
    return f"{v:13.6e}"


def _log_header(cfg: TrainConfig) -> str:
    return (f"# scale={cfg.scale} seed={cfg.seed} epochs_pretrain={cfg.epochs_pretrain} "
            f"epochs_full={cfg.epochs_full} preset={cfg.loss.preset}\n"
            "# " + " ".join(LOG_COLUMNS) + "\n")


class Trainer:
    def __init__(self, state: TrainState, hr_images: Sequence[Image], out_dir):
        self.state = state
        self.cfg = state.config
        self.hr_images = list(hr_images)
        self.out_dir = Path(out_dir)
        self.extractor = FeatureExtractor(self.cfg.loss.extractor_seed) if self.cfg.ablation.use_perceptual_loss else None
        if not self.hr_images:
            raise TrainingError("dataset is empty")
        side = self.cfg.data.patch_lr * self.cfg.scale
        if not any(img.height >= side and img.width >= side for img in self.hr_images):
            raise TrainingError(f"no image is at least {side}x{side}; cannot sample scale-{self.cfg.scale} patches")
        _prepare_out_dir(self.out_dir)

    @property
    def log_path(self) -> Path:
        return self.out_dir / LOG_NAME

    def _batches(self, pairs: list[PatchPair]):
        bs = self.cfg.data.batch_size
        need_edges = self.cfg.arch.edge_attention
        for start in range(0, len(pairs), bs):
            chunk = pairs[start:start + bs]
            lr_imgs = [p.lr for p in chunk]
            yield to_tensor(lr_imgs), to_tensor([p.hr for p in chunk]), edge_tensor(lr_imgs, self.cfg.canny) if need_edges else None

    def _train_step(self, lr: Tensor, hr: Tensor, edge: Tensor | None, weights) -> tuple[float, ...]:
        st = self.state
        g, d = st.generator, st.discriminator
        sr = g(lr, edge, train=True)
        d_loss = 0.0
        adversarial = weights.adversarial > 0 and d is not None
        if adversarial:
            st.d_opt.zero_grad()
            ld = adversarial_loss_discriminator(d(hr, train=True), d(sr.detach(), train=True),
                                                1.0 - self.cfg.loss.label_smoothing)
            backward(ld)
            st.d_opt.step()
            d_loss = ld.item()

        st.g_opt.zero_grad()
        l_pix = pixel_loss(sr, hr) if weights.pixel > 0 else None
        l_perc = perceptual_loss(self.extractor, sr, hr) if weights.perceptual > 0 else None
        l_adv = adversarial_loss_generator(d(sr, train=True)) if adversarial else None
        total = total_loss(weights, l_pix, l_perc, l_adv)
        if total.requires_grad:
            backward(total)
            st.g_opt.step()
        if d is not None:
            d.zero_grad()
        pix_value = l_pix.item() if l_pix is not None else float(np.mean((sr.data - hr.data) ** 2))
        return (pix_value, l_perc.item() if l_perc is not None else 0.0,
                l_adv.item() if l_adv is not None else 0.0, total.item(), d_loss)

    def run_epoch(self, log) -> None:
        st, cfg = self.state, self.cfg
        epoch = st.epoch
        weights = cfg.weights_for_epoch(epoch)
        st.g_opt.lr, d_lr = cfg.lrs_for_epoch(epoch)
        if st.d_opt is not None:
            st.d_opt.lr = d_lr
        if epoch == cfg.epochs_pretrain and epoch > 0:
            log.write(f"# stage full from epoch {epoch}\n")
        elif epoch == 0 and cfg.epochs_pretrain > 0:
            log.write("# stage pretrain from epoch 0\n")
        elif epoch == 0:
            log.write("# stage full from epoch 0\n")
        pairs = sample_patch_pairs(self.hr_images, cfg.scale, cfg.data.patches_per_epoch, st.rng, cfg.data.patch_lr)
        sums = np.zeros(5)
        steps = 0
        for lr, hr, edge in self._batches(pairs):
            values = self._train_step(lr, hr, edge, weights)
            sums += values
            steps += 1
            st.step += 1
            log.write(f"{epoch:5d} {st.step:8d} " + " ".join(_fmt(v) for v in values) + " "
                      + " ".join(_fmt(w) for w in (weights.pixel, weights.perceptual, weights.adversarial)) + "\n")
        log.flush()
        st.history.append([float(v) for v in sums / max(steps, 1)])
        st.epoch += 1

    def run(self, stop_after: int | None = None) -> Path:
        """Train until the schedule is complete (or ``stop_after`` epochs are done); returns the state path."""
        st = self.state
        target = self.cfg.epochs_total if stop_after is None else min(stop_after, self.cfg.epochs_total)
        state_path = self.out_dir / STATE_NAME
        _truncate_log(self.log_path, st.epoch)
        with open(self.log_path, "a") as log:
            if st.epoch == 0 and self.log_path.stat().st_size == 0:
                log.write(_log_header(self.cfg))
            if st.epoch == 0:
                st.save(state_path)
            while st.epoch < target:
                self.run_epoch(log)
                st.save(state_path)
        if st.done:
            st.save(self.out_dir / FINAL_NAME)
            return self.out_dir / FINAL_NAME
        return state_path


def _truncate_log(path: Path, epoch: int) -> None:
    """Drop records of epochs at or after ``epoch`` (left behind by an interrupted run)."""
    if not path.exists():
        return
    kept = []
    for line in path.read_text().splitlines(keepends=True):
        if not line.startswith("#"):
            fields = line.split()
            if fields and int(fields[0]) >= epoch:
                break
        elif line.startswith("# stage") and int(line.split()[-1]) >= epoch:
            break
        kept.append(line)
    path.write_text("".join(kept))


def read_log(path) -> np.ndarray:
    """Step records of a training log as an (n, 10) array."""
    rows = [list(map(float, line.split())) for line in Path(path).read_text().splitlines()
            if line.strip() and not line.startswith("#")]
    return np.array(rows, dtype=np.float64).reshape(-1, len(LOG_COLUMNS))


def train(config: TrainConfig, hr_dir, out_dir, stop_after: int | None = None,
          hr_images: Sequence[Image] | None = None) -> Path:
    """Train from scratch; writes ``state.eatsr`` every epoch and ``final.eatsr`` at the end."""
    config.validate()
    images = list(hr_images) if hr_images is not None else load_dataset(hr_dir)
    out_dir = Path(out_dir)
    state = TrainState.fresh(config, str(Path(hr_dir).resolve()) if hr_dir is not None else "")
    trainer = Trainer(state, images, out_dir)
    if trainer.log_path.exists():
        trainer.log_path.unlink()
    return trainer.run(stop_after)


def resume(state_path, hr_dir=None, stop_after: int | None = None,
           hr_images: Sequence[Image] | None = None) -> Path:
    """Continue an interrupted run from its state file, in the state file's directory."""
    state_path = Path(state_path)
    state = TrainState.load(state_path)
    out_dir = state_path.parent
    if state.done:
        final = out_dir / FINAL_NAME
        if not final.exists():
            state.save(final)
        return final
    if hr_images is None:
        hr_dir = hr_dir or state.data_dir
        if not hr_dir:
            raise TrainingError("state does not record a data directory; pass one explicitly")
        hr_images = load_dataset(hr_dir)
    return Trainer(state, hr_images, out_dir).run(stop_after)


def variant_config(config: TrainConfig, variant: str) -> TrainConfig:
    if variant not in VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}; choose from {sorted(VARIANTS)}")
    cfg = from_text(config.to_text())
    setattr(cfg.ablation, VARIANTS[variant], False)
    return cfg.validate()


def ablate(config: TrainConfig, variant: str, hr_dir, out_dir, hr_images: Sequence[Image] | None = None) -> Path:
    """Train one single-ablation variant of ``config``."""
    return train(variant_config(config, variant), hr_dir, out_dir, hr_images=hr_images)


# ---------------------------------------------------------------------------
# inference and evaluation


def load_generator(path) -> tuple[Generator, TrainConfig]:
    tensors, sections = checkpoint.load(path)
    if b"CONF" not in sections:
        raise checkpoint.CheckpointError(f"{path}: missing CONF section; cannot rebuild the generator")
    config = from_text(sections[b"CONF"].decode("utf-8"))
    g = Generator(config.scale, config.arch, np.random.default_rng(0))
    g.load_state_dict(_strip(tensors, "G."))
    return g, config


def upscale(g: Generator, images: Sequence[Image], params: CannyConfig) -> list[Image]:
    """Run the generator in eval mode on same-sized LR images."""
    lr = to_tensor(list(images))
    edge = edge_tensor(images, params) if g.edge_attention else None
    with no_grad():
        out = g(lr, edge, train=False)
    return [from_tensor(out, i) for i in range(len(images))]


def super_resolve(ckpt, inp, out_dir, expected_scale: int | None = None) -> list[Path]:
    g, config = load_generator(ckpt)
    if expected_scale is not None and expected_scale != config.scale:
        raise ValueError(f"requested scale {expected_scale} does not match checkpoint scale {config.scale}")
    inp = Path(inp)
    if inp.is_dir():
        paths = list_images(inp)
        if not paths:
            raise TrainingError(f"input directory {inp} contains no .png/.ppm images")
    elif inp.exists():
        paths = [inp]
    else:
        raise TrainingError(f"input {inp} does not exist")
    out_dir = Path(out_dir)
    _prepare_out_dir(out_dir)
    written = []
    for p in paths:
        (sr,) = upscale(g, [load_image(p)], config.canny)
        target = out_dir / p.name
        save_image(sr, target)
        written.append(target)
    return written


@dataclass
class HeldOutScore:
    model_psnr: float
    bicubic_psnr: float

    @property
    def margin(self) -> float:
        return self.model_psnr - self.bicubic_psnr


def evaluate_pairs(g: Generator, pairs: Sequence[PatchPair], params: CannyConfig, batch: int = 8) -> HeldOutScore:
    """Mean PSNR of generator and of bicubic upscaling on (LR, HR) pairs; outputs are 8-bit quantized."""
    model, bicubic = [], []
    for start in range(0, len(pairs), batch):
        chunk = pairs[start:start + batch]
        outs = upscale(g, [p.lr for p in chunk], params)
        for p, sr in zip(chunk, outs):
            base = bicubic_resize(p.lr, p.hr.height, p.hr.width)
            base = Image(quantize(base.data).astype(np.float64))
            model.append(psnr(sr, p.hr))
            bicubic.append(psnr(base, p.hr))
    return HeldOutScore(_finite_mean(model), _finite_mean(bicubic))


def _finite_mean(values) -> float:
    finite = [v for v in values if math.isfinite(v)]
    return float(np.mean(finite)) if finite else math.inf
