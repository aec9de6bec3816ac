"""Edge-attention super-resolution GAN built on a small numpy autodiff engine."""

from .canny import EdgeMap, canny
from .config import TrainConfig, load_config
from .imageio import Image, PatchPair, bicubic_resize, load_image, save_image
from .metrics import psnr, ssim
from .network import ArchConfig, Discriminator, Generator, NeaBlock, HybridEdgeResBlock, init_params
from .objective import LossWeights, total_loss
from .tensor import Tensor, backward, no_grad

__all__ = [
    "ArchConfig",
    "Discriminator",
    "EdgeMap",
    "Generator",
    "HybridEdgeResBlock",
    "Image",
    "LossWeights",
    "NeaBlock",
    "PatchPair",
    "Tensor",
    "TrainConfig",
    "backward",
    "bicubic_resize",
    "canny",
    "init_params",
    "load_config",
    "load_image",
    "no_grad",
    "psnr",
    "save_image",
    "ssim",
    "total_loss",
]

__version__ = "0.1.0"
