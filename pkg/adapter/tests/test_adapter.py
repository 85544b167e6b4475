"""Adapter conformance tests.

These tests are the one place allowed to import the benchmark engine: they
prove that stores written by this package's independent writer are read,
validated, and reproduced bit-exactly by the consumer side.
"""

import json

import numpy as np
import pytest
from PIL import Image

from encoder_adapter import (
    CheckpointNotFound,
    ExtractionSpec,
    UnreadableInput,
    available,
    extract_embeddings,
    model_card,
    parameter_count_millions,
    resolve,
    smallest_checkpoint,
)
from encoder_adapter.cli import main as cli_main

from mprbench.store import l2_normalize, read_embeddings, validate, write_embeddings


@pytest.fixture(scope="module")
def catalog_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("texts") / "catalog.jsonl"
    rows = [
        {"sku_id": "034000001231", "caption": "The product is a dark brown chocolate syrup in a bottle."},
        {"sku_id": "025500001234", "caption": "The product is a red can of classic roast ground coffee."},
        {"sku_id": "073214001347", "caption": "The product is a blue box of elbow macaroni pasta."},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def image_dir(tmp_path_factory):
    rng = np.random.default_rng(11)
    root = tmp_path_factory.mktemp("images")
    for name in ("034000001231", "025500001234", "073214001347"):
        pixels = rng.integers(0, 255, size=(96, 96, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(root / f"{name}.png")
    return root


@pytest.fixture(scope="module")
def text_store(catalog_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("stores") / "gallery.ompr"
    spec = ExtractionSpec(
        checkpoint=smallest_checkpoint(),
        input_kind="texts",
        input_path=str(catalog_path),
        output=str(out),
    )
    return extract_embeddings(spec), spec


class TestConformance:
    def test_store_validates_with_zero_findings(self, text_store):
        path, _ = text_store
        matrix, manifest = read_embeddings(path)
        report = validate(matrix)
        assert report.clean, report.findings()
        assert matrix.count == 3
        assert matrix.side.value == "gallery"
        assert manifest.model.name == smallest_checkpoint()
        assert manifest.model.pretrain_dataset == "random-init"

    def test_rows_unit_norm_within_1e3(self, text_store):
        path, _ = text_store
        matrix, _ = read_embeddings(path)
        norms = np.linalg.norm(matrix.rows.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-3)

    def test_binary_round_trips_bit_exactly_through_the_consumer(self, text_store, tmp_path):
        path, _ = text_store
        matrix, manifest = read_embeddings(path)
        rewritten = write_embeddings(matrix, manifest, tmp_path / "rewrite.ompr")
        # two independent writers, one byte layout
        assert rewritten.read_bytes() == path.read_bytes()
        again, again_manifest = read_embeddings(rewritten)
        assert again.identical(matrix)
        assert again_manifest.checksum == manifest.checksum

    def test_two_runs_are_bit_identical(self, text_store, catalog_path, tmp_path):
        path, spec = text_store
        from dataclasses import replace

        second = extract_embeddings(replace(spec, output=str(tmp_path / "again.ompr")))
        assert second.read_bytes() == path.read_bytes()

    def test_ids_are_catalog_skus(self, text_store):
        path, _ = text_store
        matrix, _ = read_embeddings(path)
        assert matrix.ids == ["034000001231", "025500001234", "073214001347"]


class TestParameterCounts:
    def test_vit_b_32_class(self):
        assert parameter_count_millions("ViT-B-32") == pytest.approx(151.0, abs=2.0)

    def test_vit_l_14_class(self):
        assert parameter_count_millions("ViT-L-14") == pytest.approx(428.0, abs=2.0)

    def test_model_card_fields(self):
        card = model_card("ViT-B-32", pretrained="local-tag")
        assert card.resolution_px == 224
        assert card.pretrain_dataset == "local-tag"
        assert card.params_millions > 0

    def test_unknown_checkpoint(self):
        with pytest.raises(CheckpointNotFound):
            model_card("ViT-Z-999")
        with pytest.raises(CheckpointNotFound):
            resolve("nope")


class TestImageExtraction:
    def test_images_make_a_valid_probe_store(self, image_dir, text_store, tmp_path):
        gallery_path, spec = text_store
        out = tmp_path / "probes.ompr"
        extract_embeddings(
            ExtractionSpec(
                checkpoint=spec.checkpoint,
                input_kind="images",
                input_path=str(image_dir),
                output=str(out),
            )
        )
        probes, manifest = read_embeddings(out)
        assert validate(probes).clean
        assert probes.side.value == "probe"
        assert probes.ids == ["025500001234", "034000001231", "073214001347"]  # sorted stems
        gallery, _ = read_embeddings(gallery_path)
        assert probes.dim == gallery.dim  # towers share the projection space

    def test_batch_size_invariance(self, catalog_path, tmp_path):
        outs = []
        for batch in (1, 32):
            out = tmp_path / f"b{batch}.ompr"
            extract_embeddings(
                ExtractionSpec(
                    checkpoint=smallest_checkpoint(),
                    input_kind="texts",
                    input_path=str(catalog_path),
                    output=str(out),
                    batch_size=batch,
                )
            )
            outs.append(read_embeddings(out)[0].rows)
        np.testing.assert_allclose(outs[0], outs[1], atol=1e-4)


class TestInputErrors:
    def test_missing_text_file(self, tmp_path):
        spec = ExtractionSpec(
            checkpoint=smallest_checkpoint(),
            input_kind="texts",
            input_path=str(tmp_path / "absent.jsonl"),
            output=str(tmp_path / "o.ompr"),
        )
        with pytest.raises(UnreadableInput):
            extract_embeddings(spec)

    def test_empty_image_dir(self, tmp_path):
        (tmp_path / "imgs").mkdir()
        spec = ExtractionSpec(
            checkpoint=smallest_checkpoint(),
            input_kind="images",
            input_path=str(tmp_path / "imgs"),
            output=str(tmp_path / "o.ompr"),
        )
        with pytest.raises(UnreadableInput):
            extract_embeddings(spec)

    def test_bad_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            ExtractionSpec(checkpoint="ViT-B-32", input_kind="audio", input_path="x", output="y")


class TestNormalizationAgreement:
    def test_adapter_normalization_matches_consumer(self, text_store):
        # normalizing an already-normalized store must be a no-op at 1e-7
        path, _ = text_store
        matrix, _ = read_embeddings(path)
        renormalized = l2_normalize(matrix)
        np.testing.assert_allclose(renormalized.rows, matrix.rows, atol=1e-7)


class TestCli:
    def test_list_and_card(self, capsys):
        assert cli_main(["list"]) == 0
        listing = capsys.readouterr().out
        for name in available():
            assert name in listing
        assert cli_main(["card", "--checkpoint", "ViT-B-32"]) == 0
        card = json.loads(capsys.readouterr().out)
        assert card["params_millions"] == pytest.approx(151.3, abs=0.1)

    def test_run_and_unknown_checkpoint(self, catalog_path, tmp_path, capsys):
        out = tmp_path / "cli.ompr"
        code = cli_main(
            ["run", "--checkpoint", smallest_checkpoint(), "--kind", "texts",
             "--input", str(catalog_path), "--output", str(out)]
        )
        assert code == 0 and out.exists()
        capsys.readouterr()
        assert cli_main(["card", "--checkpoint", "missing"]) == 1
        assert "CheckpointNotFound" in capsys.readouterr().err
