"""Contract tests against the classifier's external interfaces.

Network access (and so the pretrained checkpoint) is unavailable in CI,
so these run the exact ViT-L/14 architecture with seeded random weights
(--weights random). Dimension, format, determinism, and perturbation
sensitivity are properties of the architecture and the pipeline, not of
the trained weights; with the published checkpoint the same commands
produce the paper-grade features.
"""

import json
import subprocess

import numpy as np
import pytest

from fsextract.backbones import BACKBONES, InvalidLayerError, check_layer
from fsextract.cli import main as cli_main
from fsextract.extract import ExtractConfig, SourceDir, extract
from fsextract.preprocess import Perturbation
from conftest import read_fseb, synthetic_image


@pytest.fixture(scope="module")
def vitl_outputs(smoke_images, tmp_path_factory):
    """One ViT-L/14 pass over the 10-image smoke set, plus a repeat and a
    JPEG-50 variant of a single image for similarity checks."""
    real_dir, fake_dir = smoke_images
    out_root = tmp_path_factory.mktemp("vitl")
    config = ExtractConfig(backbone="vit-l-14", layer=12, weights="random", torch_seed=0)

    smoke_path = out_root / "smoke.fseb"
    manifest_path = out_root / "smoke.manifest.json"
    dirs = [SourceDir(real_dir, "real", 0), SourceDir(fake_dir, "genx", 1)]
    extract(dirs, config, smoke_path, manifest_path)

    one_dir = out_root / "one"
    one_dir.mkdir()
    synthetic_image(100).save(one_dir / "img.png")  # same image as real_0
    first = out_root / "one_a.fseb"
    second = out_root / "one_b.fseb"
    extract([SourceDir(one_dir, "real", 0)], config, first)
    extract([SourceDir(one_dir, "real", 0)], config, second)

    perturbed = out_root / "one_qf50.fseb"
    config_qf = ExtractConfig(
        backbone="vit-l-14", layer=12, weights="random", torch_seed=0,
        perturbation=Perturbation(jpeg_qf=50),
    )
    extract([SourceDir(one_dir, "real", 0)], config_qf, perturbed)

    return {
        "smoke": smoke_path,
        "manifest": manifest_path,
        "repeat": (first, second),
        "perturbed": perturbed,
    }


class TestSmokeSet:
    def test_passes_fscache_validate(self, vitl_outputs):
        proc = subprocess.run(
            ["fscache", "validate", str(vitl_outputs["smoke"])], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        summary = json.loads(proc.stdout)
        assert summary["valid"] is True
        assert summary["count"] == 10
        assert summary["dimension"] == 1024  # ViT-L/14 hidden width
        assert summary["layer"] == 12
        assert summary["normalized"] is True

    def test_sources_and_labels(self, vitl_outputs):
        _, records = read_fseb(vitl_outputs["smoke"])
        assert sum(r["label"] == 0 for r in records) == 6
        assert sum(r["label"] == 1 for r in records) == 4
        assert {r["source"] for r in records} == {"real", "genx"}

    def test_manifest_describes_run(self, vitl_outputs):
        manifest = json.loads(open(vitl_outputs["manifest"]).read())
        assert manifest["dimension"] == 1024
        assert manifest["count"] == 10
        assert manifest["skipped"] == []
        assert "cls-postblock" in manifest["backbone_tag"]


class TestSimilarityContracts:
    def test_same_image_self_similarity_is_one(self, vitl_outputs):
        first, second = vitl_outputs["repeat"]
        _, [a] = read_fseb(first)
        _, [b] = read_fseb(second)
        sim = float(np.dot(a["vector"], b["vector"]))
        assert abs(sim - 1.0) < 1e-6

    def test_qf50_strictly_reduces_self_similarity(self, vitl_outputs):
        _, [clean] = read_fseb(vitl_outputs["repeat"][0])
        _, [qf50] = read_fseb(vitl_outputs["perturbed"])
        sim = float(np.dot(clean["vector"], qf50["vector"]))
        assert sim < 1.0 - 1e-6


class TestValidation:
    def test_layer_bounds_per_backbone(self):
        check_layer(BACKBONES["vit-l-14"], 24)
        check_layer(BACKBONES["vit-b-32"], 12)
        with pytest.raises(InvalidLayerError):
            check_layer(BACKBONES["vit-b-32"], 13)
        with pytest.raises(InvalidLayerError):
            check_layer(BACKBONES["vit-l-14"], 0)

    def test_undecodable_image_skipped_and_listed(self, tmp_path):
        img_dir = tmp_path / "imgs"
        img_dir.mkdir()
        synthetic_image(1, size=(64, 64)).save(img_dir / "ok.png")
        (img_dir / "broken.png").write_bytes(b"not an image at all")
        out = tmp_path / "out.fseb"
        manifest = tmp_path / "m.json"
        config = ExtractConfig(backbone="vit-b-32", layer=6, weights="random", torch_seed=1)
        result = extract([SourceDir(img_dir, "real", 0)], config, out, manifest)
        assert result.count == 1
        assert len(result.skipped) == 1
        listed = json.loads(open(manifest).read())["skipped"]
        assert len(listed) == 1 and "broken.png" in listed[0]["path"]
        proc = subprocess.run(["fscache", "validate", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0


class TestCli:
    def test_end_to_end_smaller_backbone(self, smoke_images, tmp_path):
        real_dir, fake_dir = smoke_images
        out = tmp_path / "cli.fseb"
        manifest = tmp_path / "cli.manifest.json"
        code = cli_main(
            [
                "extract",
                "--backbone", "vit-b-32",
                "--layer", "6",
                "--weights", "random",
                "--real", str(real_dir),
                "--fake", f"genx={fake_dir}",
                "--out", str(out),
                "--manifest", str(manifest),
            ]
        )
        assert code == 0
        header, records = read_fseb(out)
        assert header["dimension"] == 768
        assert len(records) == 10

    def test_conflicting_perturbations_rejected(self, tmp_path):
        code = cli_main(
            ["extract", "--real", str(tmp_path), "--jpeg-qf", "75", "--blur-sigma", "1.0", "--out", "x.fseb"]
        )
        assert code == 1

    def test_missing_dir_is_io_error(self, tmp_path):
        code = cli_main(["extract", "--real", str(tmp_path / "nope"), "--out", str(tmp_path / "x.fseb")])
        assert code == 2

    def test_bad_fake_spec_rejected(self, tmp_path):
        code = cli_main(["extract", "--fake", "noequalsign", "--out", str(tmp_path / "x.fseb")])
        assert code == 1
