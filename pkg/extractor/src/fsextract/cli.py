"""Command line for batch CLIP feature extraction.

    fsextract extract --backbone vit-l-14 --layer 12 \
        --real data/real --fake biggan=data/biggan_fakes \
        [--jpeg-qf 75 | --blur-sigma 2.0] \
        --out feats.fseb --manifest manifest.json
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbones import BACKBONES, InvalidLayerError
from .extract import ExtractConfig, SourceDir, extract
from .preprocess import BLUR_SIGMAS, JPEG_QUALITY_FACTORS, Perturbation


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsextract", description="CLIP intermediate-layer feature extraction to FSEB files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract features from image directories")
    p.add_argument("--backbone", choices=sorted(BACKBONES), default="vit-l-14")
    p.add_argument("--layer", type=int, default=12, help="1-based transformer block index")
    p.add_argument("--real", action="append", default=[], metavar="DIR", help="directory of real images (repeatable)")
    p.add_argument(
        "--fake",
        action="append",
        default=[],
        metavar="NAME=DIR",
        help="generator name and its image directory (repeatable)",
    )
    p.add_argument("--jpeg-qf", type=int, choices=JPEG_QUALITY_FACTORS, help="re-encode at this JPEG quality before resize")
    p.add_argument("--blur-sigma", type=float, choices=BLUR_SIGMAS, help="gaussian blur at this sigma before resize")
    p.add_argument("--weights", choices=["pretrained", "random"], default="pretrained",
                   help="'random' builds the architecture with seeded init (offline smoke mode)")
    p.add_argument("--torch-seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="sidecar JSON with config and skipped files")
    return parser


def _parse_fake(value: str) -> SourceDir:
    if "=" not in value:
        raise ValueError(f"--fake expects NAME=DIR, got {value!r}")
    name, _, dir_ = value.partition("=")
    if not name or name == "real":
        raise ValueError(f"--fake needs a non-reserved generator name, got {name!r}")
    return SourceDir(Path(dir_), name, 1)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jpeg_qf is not None and args.blur_sigma is not None:
            raise ValueError("choose at most one of --jpeg-qf / --blur-sigma")
        perturbation = None
        if args.jpeg_qf is not None:
            perturbation = Perturbation(jpeg_qf=args.jpeg_qf)
        elif args.blur_sigma is not None:
            perturbation = Perturbation(gaussian_sigma=args.blur_sigma)
        dirs = [SourceDir(Path(d), "real", 0) for d in args.real]
        dirs += [_parse_fake(v) for v in args.fake]
        if not dirs:
            raise ValueError("no input directories; pass --real and/or --fake")
        for d in dirs:
            if not d.path.is_dir():
                raise FileNotFoundError(f"{d.path} is not a directory")
        config = ExtractConfig(
            backbone=args.backbone,
            layer=args.layer,
            perturbation=perturbation,
            weights=args.weights,
            torch_seed=args.torch_seed,
            batch_size=args.batch_size,
        )
        result = extract(dirs, config, args.out, args.manifest)
    except (ValueError, InvalidLayerError) as exc:
        print(f"fsextract: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fsextract: {exc}", file=sys.stderr)
        return 2
    print(f"extracted {result.count} records to {args.out} ({len(result.skipped)} skipped)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
