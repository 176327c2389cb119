"""Intermediate-layer CLIP feature extraction to FSEB embedding files."""

__version__ = "0.1.0"

from .backbones import BACKBONES, InvalidLayerError, class_token_features, load_backbone
from .extract import ExtractConfig, SourceDir, extract
from .preprocess import Perturbation, UndecodableImageError, gaussian_blur, jpeg_recompress

__all__ = [
    "BACKBONES",
    "ExtractConfig",
    "InvalidLayerError",
    "Perturbation",
    "SourceDir",
    "UndecodableImageError",
    "class_token_features",
    "extract",
    "gaussian_blur",
    "jpeg_recompress",
    "load_backbone",
]
