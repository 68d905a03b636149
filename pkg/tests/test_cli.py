"""CLI subcommands: exit codes, file outputs, determinism."""

import os

import numpy as np
import pytest

from scribeid import imgproc
from scribeid.cli import main

FAST = [
    "--states", "3", "--mixtures", "2", "--train-iters", "5",
    "--zone-states", "3", "--zone-mixtures", "1", "--zone-iters", "4",
]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli-data"))
    rc = main(
        ["synth", "--out", out, "--writers", "3", "--pages", "5",
         "--lines", "2", "--seed", "11"]
    )
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def registry(dataset, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli-reg"))
    rc = main(
        ["train", "--manifest", os.path.join(dataset, "manifest.tsv"),
         "--out", out, "--seed", "11", *FAST]
    )
    assert rc == 0
    return out


class TestSynth:
    def test_outputs_exist(self, dataset):
        names = sorted(os.listdir(dataset))
        assert "manifest.tsv" in names
        assert "w00-p00.png" in names
        assert "w00-p00.png.gt.txt" in names

    def test_determinism_byte_identical(self, dataset, tmp_path):
        out2 = str(tmp_path / "again")
        rc = main(
            ["synth", "--out", out2, "--writers", "3", "--pages", "5",
             "--lines", "2", "--seed", "11"]
        )
        assert rc == 0
        for name in sorted(os.listdir(dataset)):
            a = open(os.path.join(dataset, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, name

    def test_pages_load(self, dataset):
        img = imgproc.load_page(os.path.join(dataset, "w01-p02.png"))
        assert img.shape == (620, 800)


class TestSegmentExtract:
    def test_segment_stdout(self, dataset, capsys):
        rc = main(["segment", "--image", os.path.join(dataset, "w00-p00.png")])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("page score") == 2

    def test_extract_writes_feature_files(self, dataset, tmp_path):
        out = str(tmp_path / "feats")
        rc = main(
            ["extract", "--image", os.path.join(dataset, "w00-p00.png"),
             "--out", out]
        )
        assert rc == 0
        files = sorted(os.listdir(out))
        assert files == ["line_000.fseq", "line_001.fseq"]
        from scribeid.features import load_feature_frames

        frames = load_feature_frames(os.path.join(out, files[0]))
        assert frames.ndim == 2 and frames.shape[1] == 128


class TestIdentify:
    def test_identify_prints_report(self, dataset, registry, capsys):
        rc = main(
            ["identify", "--registry", registry,
             "--image", os.path.join(dataset, "w02-p04.png"),
             "--seed", "11"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "page winner w02" in out

    def test_conflicting_flags_rejected(self, dataset, registry, capsys):
        rc = main(
            ["identify", "--registry", registry,
             "--image", os.path.join(dataset, "w00-p00.png"),
             "--orientation-bins", "16"]
        )
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error: config:")

    def test_missing_image_is_io_error(self, registry, capsys, tmp_path):
        rc = main(
            ["identify", "--registry", registry,
             "--image", str(tmp_path / "missing.png")]
        )
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestEvaluate:
    def test_reports_byte_identical_across_runs(self, dataset, tmp_path):
        outs = []
        for name in ("e1", "e2"):
            out = str(tmp_path / name)
            rc = main(
                ["evaluate", "--manifest", os.path.join(dataset, "manifest.tsv"),
                 "--out", out, "--folds", "2", "--seed", "11", *FAST]
            )
            assert rc == 0
            outs.append(out)
        a = open(os.path.join(outs[0], "report.txt"), "rb").read()
        b = open(os.path.join(outs[1], "report.txt"), "rb").read()
        assert a == b
        assert os.path.exists(os.path.join(outs[0], "timings.txt"))

    def test_block_mode_with_sidecar_grammar(self, dataset, tmp_path):
        out = str(tmp_path / "block")
        rc = main(
            ["evaluate", "--manifest", os.path.join(dataset, "manifest.tsv"),
             "--out", out, "--folds", "2", "--seed", "11",
             "--mode", "block-line", *FAST]
        )
        assert rc == 0
        report = open(os.path.join(out, "report.txt")).read()
        assert "mode block-line" in report


class TestImportMuscima:
    def test_builds_manifest(self, tmp_path):
        root = tmp_path / "scans"
        for wid in ("w1", "w2"):
            os.makedirs(root / wid)
            imgproc.save_page(
                np.full((10, 10), 255, np.uint8), root / wid / "page1.png"
            )
        out = str(tmp_path / "m.tsv")
        rc = main(["import-muscima", "--root", str(root), "--out", out])
        assert rc == 0
        lines = open(out).read().strip().splitlines()
        assert len(lines) == 2

    def test_empty_root_fails(self, tmp_path, capsys):
        rc = main(
            ["import-muscima", "--root", str(tmp_path), "--out",
             str(tmp_path / "m.tsv")]
        )
        assert rc == 1
        assert "error: config:" in capsys.readouterr().err


class TestConfigFile:
    def test_file_plus_flag_override(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("states = 3\nmixtures = 2\ntrain-iters = 5\nseed = 11\n")
        rc = main(["segment", "--image", os.path.join(dataset, "w00-p01.png"),
                   "--config", str(cfg)])
        assert rc == 0
        assert "page score" in capsys.readouterr().out

    def test_env_var_default(self, dataset, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "env.cfg"
        cfg.write_text("segment-threshold = 0.1\n")
        monkeypatch.setenv("SCRIBEID_CONFIG", str(cfg))
        rc = main(["segment", "--image", os.path.join(dataset, "w00-p01.png")])
        assert rc == 0

    def test_unknown_key_rejected(self, dataset, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no-such-knob = 1\n")
        rc = main(["segment", "--image", os.path.join(dataset, "w00-p01.png"),
                   "--config", str(cfg)])
        assert rc == 1
        assert "error: config:" in capsys.readouterr().err
