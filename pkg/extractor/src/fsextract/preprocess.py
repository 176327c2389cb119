"""Image decoding, robustness perturbations, and CLIP preprocessing.

Perturbations (JPEG re-encode, gaussian blur) apply to the image at its
native size, before the 224 resize, mirroring how compressed or blurred
images occur in the wild. Preprocessing then follows the standard CLIP
recipe: bicubic resize of the short side to 224, center crop, and
per-channel normalization.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from .backbones import RESOLUTION

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)

JPEG_QUALITY_FACTORS = (95, 90, 75, 50)
BLUR_SIGMAS = (1.0, 2.0, 3.0, 4.0)


class UndecodableImageError(Exception):
    """The file could not be decoded as an image."""


@dataclass(frozen=True)
class Perturbation:
    """Exactly one of jpeg_qf / gaussian_sigma is set."""

    jpeg_qf: int | None = None
    gaussian_sigma: float | None = None

    def __post_init__(self):
        if (self.jpeg_qf is None) == (self.gaussian_sigma is None):
            raise ValueError("set exactly one of jpeg_qf or gaussian_sigma")

    def describe(self) -> str:
        if self.jpeg_qf is not None:
            return f"jpeg-qf{self.jpeg_qf}"
        return f"blur-sigma{self.gaussian_sigma}"


def load_image(path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except Exception as exc:  # PIL raises a zoo of types for bad files
        raise UndecodableImageError(f"{path}: {exc}") from exc


def jpeg_recompress(image: Image.Image, quality: int) -> Image.Image:
    buf = io.BytesIO()
    image.save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    return Image.open(buf).convert("RGB")


def gaussian_blur(image: Image.Image, sigma: float) -> Image.Image:
    """Separable gaussian with kernel radius ceil(3 sigma), edge padding."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    arr = np.asarray(image, dtype=np.float64)
    padded = np.pad(arr, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    arr = np.apply_along_axis(lambda col: np.convolve(col, kernel, mode="valid"), 0, padded)
    padded = np.pad(arr, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    arr = np.apply_along_axis(lambda row: np.convolve(row, kernel, mode="valid"), 1, padded)
    return Image.fromarray(np.clip(np.round(arr), 0, 255).astype(np.uint8))


def perturb(image: Image.Image, perturbation: Perturbation | None) -> Image.Image:
    if perturbation is None:
        return image
    if perturbation.jpeg_qf is not None:
        return jpeg_recompress(image, perturbation.jpeg_qf)
    return gaussian_blur(image, perturbation.gaussian_sigma)


def to_model_input(image: Image.Image) -> torch.Tensor:
    """(3, 224, 224) float32 tensor, CLIP-normalized."""
    w, h = image.size
    scale = RESOLUTION / min(w, h)
    image = image.resize(
        (max(RESOLUTION, round(w * scale)), max(RESOLUTION, round(h * scale))),
        Image.BICUBIC,
    )
    w, h = image.size
    left = (w - RESOLUTION) // 2
    top = (h - RESOLUTION) // 2
    image = image.crop((left, top, left + RESOLUTION, top + RESOLUTION))
    arr = np.asarray(image, dtype=np.float32) / 255.0
    arr = (arr - np.array(CLIP_MEAN, dtype=np.float32)) / np.array(CLIP_STD, dtype=np.float32)
    return torch.from_numpy(arr.transpose(2, 0, 1))
