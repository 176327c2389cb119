"""Directory-tree feature extraction into FSEB files with a sidecar manifest."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .backbones import (
    BACKBONES,
    BackboneInfo,
    backbone_tag,
    check_layer,
    class_token_features,
    load_backbone,
)
from .fseb import Record, l2_normalize, write_fseb
from .preprocess import (
    Perturbation,
    UndecodableImageError,
    load_image,
    perturb,
    to_model_input,
)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp", ".tif", ".tiff"}


@dataclass
class SourceDir:
    """One input directory mapped to a source name and binary label."""

    path: Path
    source: str
    label: int  # 0 real, 1 fake


@dataclass
class ExtractConfig:
    backbone: str = "vit-l-14"
    layer: int = 12
    perturbation: Perturbation | None = None
    weights: str = "pretrained"  # or "random" (offline smoke mode)
    torch_seed: int = 0
    batch_size: int = 8

    def info(self) -> BackboneInfo:
        try:
            return BACKBONES[self.backbone]
        except KeyError:
            raise ValueError(
                f"unknown backbone {self.backbone!r}; choose from {sorted(BACKBONES)}"
            ) from None


@dataclass
class ExtractResult:
    count: int
    skipped: list[dict] = field(default_factory=list)


def list_images(root: Path) -> list[Path]:
    return sorted(p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def extract(dirs: list[SourceDir], config: ExtractConfig, out_path, manifest_path=None) -> ExtractResult:
    """One record per decodable image; undecodable files are skipped with a
    warning and listed in the manifest. Single-writer: the file is
    assembled after all batches complete."""
    info = config.info()
    check_layer(info, config.layer)
    model = load_backbone(info, config.weights, config.torch_seed)
    tag = backbone_tag(info, config.layer, config.weights)

    records: list[Record] = []
    skipped: list[dict] = []
    for src_dir in dirs:
        paths = list_images(src_dir.path)
        pending: list[tuple[str, torch.Tensor]] = []

        def flush():
            if not pending:
                return
            batch = torch.stack([t for _, t in pending])
            feats = class_token_features(model, batch, config.layer).double().numpy()
            for (rec_id, _), vec in zip(pending, feats):
                records.append(Record(rec_id, src_dir.source, src_dir.label, l2_normalize(vec)))
            pending.clear()

        for path in paths:
            try:
                image = load_image(path)
            except UndecodableImageError as exc:
                skipped.append({"path": str(path), "reason": str(exc)})
                print(f"warning: skipping {path}: undecodable", flush=True)
                continue
            image = perturb(image, config.perturbation)
            rec_id = f"{src_dir.source}/{path.relative_to(src_dir.path)}"
            pending.append((rec_id, to_model_input(image)))
            if len(pending) >= config.batch_size:
                flush()
        flush()

    write_fseb(out_path, records, info.hidden_size, tag, config.layer, normalized=True)
    if manifest_path:
        manifest = {
            "backbone": config.backbone,
            "backbone_tag": tag,
            "layer": config.layer,
            "weights": config.weights,
            "resolution": 224,
            "preprocessing": "short-side bicubic resize to 224, center crop, CLIP mean/std normalization",
            "perturbation": config.perturbation.describe() if config.perturbation else None,
            "dimension": info.hidden_size,
            "count": len(records),
            "sources": [
                {"path": str(d.path), "source": d.source, "label": "fake" if d.label else "real"}
                for d in dirs
            ],
            "skipped": skipped,
        }
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return ExtractResult(count=len(records), skipped=skipped)
