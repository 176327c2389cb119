"""CLIP vision backbones and intermediate-layer feature extraction.

Features are the class-token hidden state at the requested transformer
block: the residual-stream value after that block's additions, before the
final layer norm and projection head. The hook point is baked into the
backbone tag written to output files so differently-hooked features can
never be silently compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import CLIPVisionConfig, CLIPVisionModel


class InvalidLayerError(ValueError):
    """Requested block index does not exist in the chosen backbone."""


@dataclass(frozen=True)
class BackboneInfo:
    key: str  # CLI name
    hub_id: str  # pretrained checkpoint
    hidden_size: int
    layers: int
    heads: int
    intermediate_size: int
    patch_size: int


BACKBONES = {
    "vit-l-14": BackboneInfo("vit-l-14", "openai/clip-vit-large-patch14", 1024, 24, 16, 4096, 14),
    "vit-b-16": BackboneInfo("vit-b-16", "openai/clip-vit-base-patch16", 768, 12, 12, 3072, 16),
    "vit-b-32": BackboneInfo("vit-b-32", "openai/clip-vit-base-patch32", 768, 12, 12, 3072, 32),
}

RESOLUTION = 224


def backbone_tag(info: BackboneInfo, layer: int, weights: str) -> str:
    """Provenance string recorded in the embedding file header."""
    tag = f"clip-{info.key}/L{layer}-cls-postblock"
    if weights != "pretrained":
        tag += f"+{weights}"
    return tag


def check_layer(info: BackboneInfo, layer: int) -> None:
    if not 1 <= layer <= info.layers:
        raise InvalidLayerError(
            f"layer {layer} invalid for {info.key} (has blocks 1..{info.layers})"
        )


def load_backbone(info: BackboneInfo, weights: str = "pretrained", torch_seed: int = 0) -> CLIPVisionModel:
    """Instantiate the vision tower.

    weights="pretrained" pulls the published checkpoint; "random" builds
    the same architecture with seeded random init, which keeps the full
    pipeline runnable (and deterministic) on machines with no model hub
    access. Random features are only good for plumbing and smoke tests.
    """
    if weights == "pretrained":
        model = CLIPVisionModel.from_pretrained(info.hub_id)
    elif weights == "random":
        config = CLIPVisionConfig(
            hidden_size=info.hidden_size,
            intermediate_size=info.intermediate_size,
            num_hidden_layers=info.layers,
            num_attention_heads=info.heads,
            image_size=RESOLUTION,
            patch_size=info.patch_size,
        )
        torch.manual_seed(torch_seed)
        model = CLIPVisionModel(config)
    else:
        raise ValueError(f"weights must be 'pretrained' or 'random', got {weights!r}")
    model.eval()
    return model


@torch.no_grad()
def class_token_features(model: CLIPVisionModel, pixels: torch.Tensor, layer: int) -> torch.Tensor:
    """(B, hidden) class-token states at the given block (1-based)."""
    out = model(pixel_values=pixels, output_hidden_states=True)
    # hidden_states[0] is the patch-embedding output; index L is block L's output
    return out.hidden_states[layer][:, 0, :]
