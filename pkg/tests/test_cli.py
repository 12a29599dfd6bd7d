import json

import numpy as np
import pytest

from priorforge import EmbeddingSet, save_embeddings
from priorforge.cli import main


class TestSynthCommand:
    def test_synth_then_verify(self, tmp_path, capsys):
        out = tmp_path / "ds"
        code = main([
            "synth", str(out),
            "--channels", "1", "--height", "16", "--width", "16",
            "--count", "5", "--shard-size", "3", "--master-seed", "9",
        ])
        assert code == 0
        assert (out / "manifest.json").is_file()
        assert (out / "shard-00000.dipf").is_file()
        printed = capsys.readouterr().out
        assert "5 images" in printed

        code = main(["verify", str(out / "manifest.json")])
        assert code == 0
        assert "verification passed" in capsys.readouterr().out

    def test_verify_fails_on_corruption(self, tmp_path, capsys):
        out = tmp_path / "ds"
        main([
            "synth", str(out),
            "--channels", "1", "--height", "8", "--width", "8", "--count", "3",
        ])
        shard = out / "shard-00000.dipf"
        raw = bytearray(shard.read_bytes())
        raw[-1] ^= 0x01
        shard.write_bytes(bytes(raw))
        code = main(["verify", str(out / "manifest.json")])
        assert code == 2
        output = capsys.readouterr()
        assert "FAIL" in output.out

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        code = main(["synth", str(tmp_path / "x"), "--count", "0"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unwritable_out_dir_exits_1(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("occupied")
        code = main(["synth", str(blocker), "--count", "1", "--height", "8", "--width", "8"])
        assert code == 1
        assert "i/o error" in capsys.readouterr().err

    def test_missing_manifest_exits_1(self, tmp_path, capsys):
        code = main(["verify", str(tmp_path / "nope" / "manifest.json")])
        assert code == 1


class TestMetricsCommand:
    def test_prints_percentages_and_writes_report(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(100, 4)).astype(np.float32)
        real, fake = tmp_path / "r.dipe", tmp_path / "f.dipe"
        save_embeddings(real, EmbeddingSet(pts))
        save_embeddings(fake, EmbeddingSet(pts.copy()))
        report_path = tmp_path / "report.json"
        code = main([
            "metrics", "--real", str(real), "--fake", str(fake),
            "--k", "5", "--report", str(report_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "precision 100.00%" in out
        assert "recall    100.00%" in out
        assert "coverage  100.00%" in out
        assert "density   120.00%" in out
        saved = json.loads(report_path.read_text())
        assert saved["k"] == 5
        assert saved["precision"] == 1.0

    def test_bad_embedding_file_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.dipe"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
        code = main(["metrics", "--real", str(bad), "--fake", str(bad)])
        assert code == 2


class TestArgumentHandling:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "synth" in out and "verify" in out and "metrics" in out

    def test_synth_help_documents_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "default: 10000" in out  # count/shard size defaults surfaced

    def test_unknown_command_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
