import json

import pytest

from fusecluster import cli, nmf
from fusecluster.errors import NumericalError

SEPARABLE = """\
num_classes = 2
images_per_class = 15
visual_words = 20
visual_noise = 0
viewpoints = 0
labeled_fraction = 0.4
"""


@pytest.fixture
def corpus(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text(SEPARABLE)
    data = tmp_path / "data"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(data), "--seed", "0"]) == 0
    return data


def run(corpus, out, *extra):
    return cli.main(["run", "--config", str(corpus / "pipeline.cfg"), "--out", str(out), *extra])


class TestRun:
    def test_separable_end_to_end(self, corpus, tmp_path):
        assert run(corpus, tmp_path / "r") == 0
        report = json.loads((tmp_path / "r" / "metrics.json").read_text())
        assert report["purity"] == 1.0
        for name in ("fused_header.json", "fused_triplets.csv", "U.csv", "V.csv", "nmf_report.json",
                     "assignments.csv", "vocabulary.txt", "idf.csv", "fused.png", "cost_trace.png"):
            assert (tmp_path / "r" / name).exists(), name

    def test_missing_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("manifest = nowhere.csv\n")
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert str(tmp_path / "nowhere.csv") in capsys.readouterr().err

    def test_byte_identical_reruns(self, corpus, tmp_path):
        assert run(corpus, tmp_path / "a", "--no-figures") == 0
        assert run(corpus, tmp_path / "b", "--no-figures") == 0
        assert (tmp_path / "a" / "metrics.json").read_bytes() == (tmp_path / "b" / "metrics.json").read_bytes()

    def test_stagewise_matches_run(self, corpus, tmp_path):
        cfg = str(corpus / "pipeline.cfg")
        assert run(corpus, tmp_path / "whole", "--no-figures", "--seed", "5") == 0
        for stage in ("fuse", "factorize", "assign", "eval"):
            assert cli.main([stage, "--config", cfg, "--out", str(tmp_path / "staged"), "--seed", "5"]) == 0
        assert (tmp_path / "whole" / "metrics.json").read_bytes() == \
            (tmp_path / "staged" / "metrics.json").read_bytes()

    @pytest.mark.parametrize("variant", ["A", "AB", "M"])
    def test_variants_and_readouts(self, corpus, tmp_path, variant):
        assert run(corpus, tmp_path / variant, "--no-figures", "--variant", variant, "--readout", "kmeans") == 0
        report = json.loads((tmp_path / variant / "metrics.json").read_text())
        assert report["config"]["variant"] == variant
        assert report["config"]["readout"] == "kmeans"

    def test_k_star_override(self, corpus, tmp_path):
        assert run(corpus, tmp_path / "k", "--no-figures", "--k-star", "4") == 0
        assert json.loads((tmp_path / "k" / "metrics.json").read_text())["nmf"]["k_star"] == 4

    def test_include_woc(self, corpus, tmp_path):
        cfg = corpus / "pipeline.cfg"
        cfg.write_text(cfg.read_text() + "eval_include_woc = true\n")
        assert run(corpus, tmp_path / "w", "--no-figures") == 0
        assert json.loads((tmp_path / "w" / "metrics.json").read_text())["num_documents"] == 32

    def test_stdout_is_quiet(self, corpus, tmp_path, capsys):
        assert cli.main(["-v", "run", "--config", str(corpus / "pipeline.cfg"),
                         "--out", str(tmp_path / "q"), "--no-figures"]) == 0
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "purity" in captured.err


class TestErrors:
    def test_data_error(self, corpus, tmp_path):
        manifest = corpus / "manifest.csv"
        lines = manifest.read_text().splitlines()
        manifest.write_text("\n".join(lines + [lines[1]]) + "\n")
        assert run(corpus, tmp_path / "d") == 3

    def test_bad_parameter(self, corpus, tmp_path):
        cfg = corpus / "pipeline.cfg"
        cfg.write_text(cfg.read_text() + "readout = median\n")
        assert run(corpus, tmp_path / "p") == 2

    def test_numerical_failure(self, corpus, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise NumericalError("diverged")
        monkeypatch.setattr(nmf, "nmf_factorize", boom)
        assert run(corpus, tmp_path / "n") == 4

    def test_stage_out_of_order(self, corpus, tmp_path):
        assert cli.main(["assign", "--config", str(corpus / "pipeline.cfg"), "--out", str(tmp_path / "e")]) == 3


class TestDescriptorPath:
    def test_codebook_quantize_run(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text(SEPARABLE + "descriptor_dim = 3\n")
        data = tmp_path / "data"
        assert cli.main(["synth", "--config", str(cfg), "--out", str(data)]) == 0
        pcfg = str(data / "pipeline.cfg")
        staged = tmp_path / "staged"
        for stage in ("codebook", "quantize", "vocab"):
            assert cli.main([stage, "--config", pcfg, "--out", str(staged)]) == 0
        assert run(data, tmp_path / "whole", "--no-figures") == 0
        assert (staged / "histograms.csv").read_bytes() == (tmp_path / "whole" / "histograms.csv").read_bytes()
        assert (staged / "codebook.csv").read_bytes() == (tmp_path / "whole" / "codebook.csv").read_bytes()


class TestExperiment:
    def test_outputs(self, tmp_path):
        cfg = tmp_path / "e.cfg"
        cfg.write_text("seeds = 0..2\nimages_per_class = 30\nsweep_fractions = 0.2 1.0\n")
        out = tmp_path / "exp"
        assert cli.main(["experiment", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report["aggregate"]) == {"A", "AB", "M"}
        assert len(report["runs"]) == 6
        assert (out / "runs.csv").read_text().splitlines()[0].startswith("seed,variant")
        for name in ("variants.png", "sweep.json", "sweep_runs.csv", "sweep.png"):
            assert (out / name).exists()

    def test_single_variant(self, tmp_path):
        out = tmp_path / "one"
        assert cli.main(["experiment", "--out", str(out), "--seed", "3", "--variant", "A", "--no-figures"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert [r["seed"] for r in report["runs"]] == [3]
