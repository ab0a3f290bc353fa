import csv
import io
import json

import numpy as np
import pytest

from bnsl.cli import main
from bnsl.config import PRESETS, load_config, parse_config, preset, serialize_config
from bnsl.io import load_tensor
from bnsl.sampler import ConfigError


def small_desk(**over):
    doc = json.loads(json.dumps(PRESETS["paper-x3-desk"]))
    doc.update({"batch": 24, "previews": 1} | over)
    return doc


class TestConfig:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_roundtrip(self, name):
        doc = serialize_config(preset(name))
        again = serialize_config(parse_config(json.loads(json.dumps(doc))))
        assert again == doc

    def test_mixture_roundtrip(self):
        doc = small_desk(model={"mixture": [{"mean": -1, "amplitude": 0.5, "length_scale": 0.3, "weight": 1},
                                            {"mean": 1, "amplitude": 0.5, "length_scale": 0.3, "weight": 3}]})
        out = serialize_config(parse_config(doc))
        assert out == serialize_config(parse_config(out))
        assert [c["weight"] for c in out["model"]["mixture"]] == [0.25, 0.75]

    def test_short_array_named(self):
        doc = small_desk()
        doc["stages"]["strengths"] = [1.0, 0.8]
        with pytest.raises(ConfigError, match=r"stages\.strengths has 2 entries"):
            parse_config(doc)

    @pytest.mark.parametrize(
        "patch, where",
        [
            ({"kernel": "area"}, "kernel"),
            ({"seed": -1}, "seed"),
            ({"batch": 0}, "batch"),
            ({"unknown": 1}, "<root>"),
        ],
    )
    def test_schema_errors_name_path(self, patch, where):
        with pytest.raises(ConfigError, match=f"^{where}"):
            parse_config(small_desk(**patch))

    def test_nested_path(self):
        doc = small_desk()
        doc["stages"]["shifts"][1] = -2
        with pytest.raises(ConfigError, match=r"^stages\.shifts\.1"):
            parse_config(doc)

    def test_first_strength_rejected(self):
        doc = small_desk()
        doc["stages"]["strengths"][0] = 0.9
        with pytest.raises(ConfigError, match="strength"):
            parse_config(doc)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("flux-x9")

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_with_seed_moves_baseline(self):
        cfg = preset("paper-x3-desk").with_seed(17)
        assert cfg.pipeline.seed == cfg.baseline.seed == 17


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "desk.json"
    path.write_text(json.dumps(small_desk()))
    return path


class TestSampleCommand:
    def test_preset_outputs(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["sample", "--preset", "paper-x3-desk", "--out", str(out), "--runs", "1"]) == 0
        manifest = json.loads((out / "seed_0" / "manifest.json").read_text())
        assert manifest["eval_counts"] == [6, 16, 5]
        assert [s["start_index"] for s in manifest["run"]["stages"]] == [0, 4, 3]
        final = load_tensor(out / "seed_0" / "final.bnt")
        assert final.shape == (256, 1, 32, 32) and final.dtype == np.float32
        assert load_tensor(out / "seed_0" / "stage_2.bnt").shape == (256, 1, 16, 16)
        assert (out / "seed_0" / "preview_b1_c0.pgm").exists()
        rows = list(csv.reader(io.StringIO((out / "metrics.csv").read_text())))
        assert rows[0] == ["method", "seed", "mean_err", "cov_err", "psnr_vs_baseline", "flops_T"]
        assert len(rows) == 2
        assert "evaluations 6/16/5" in capsys.readouterr().out

    def test_runs_are_distinct(self, tmp_path, config_file):
        out = tmp_path / "multi"
        assert main(["sample", "--config", str(config_file), "--out", str(out), "--runs", "3", "--seed", "10"]) == 0
        finals = [load_tensor(out / f"seed_{s}" / "final.bnt") for s in (10, 11, 12)]
        seeds = [json.loads((out / f"seed_{s}" / "manifest.json").read_text())["seed"] for s in (10, 11, 12)]
        assert seeds == [10, 11, 12]
        assert not np.array_equal(finals[0], finals[1])
        assert not np.array_equal(finals[1], finals[2])

    def test_rerun_is_reproducible(self, tmp_path, config_file):
        for name in ("a", "b"):
            assert main(["sample", "--config", str(config_file), "--out", str(tmp_path / name)]) == 0
        a = (tmp_path / "a" / "seed_0" / "final.bnt").read_bytes()
        assert a == (tmp_path / "b" / "seed_0" / "final.bnt").read_bytes()


class TestAblateCommand:
    def test_rows_and_directions(self, tmp_path, capsys, config_file):
        assert main(["ablate", "--config", str(config_file), "--out", str(tmp_path)]) == 0
        text = (tmp_path / "ablation.csv").read_text()
        assert capsys.readouterr().out == text
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 18
        by = {(r["method"], int(r["seed"])): r for r in rows}
        for seed in range(3):
            assert float(by["bottleneck", seed]["flops_T"]) < float(by["standard", seed]["flops_T"])
            assert by["standard", seed]["psnr_vs_baseline"] == "inf"
            assert float(by["no-noise-reintro", seed]["cov_err"]) > float(by["bottleneck", seed]["cov_err"])

    def test_mode_subset(self, capsys, config_file):
        assert main(["ablate", "--config", str(config_file), "--modes", "standard,bottleneck", "--runs", "1"]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 3

    def test_unknown_mode(self, config_file):
        assert main(["ablate", "--config", str(config_file), "--modes", "turbo"]) == 2


class TestCostCommand:
    def test_flux_x3(self, capsys):
        assert main(["cost", "--preset", "flux-x3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        base = lines[1].split()
        assert base[0] == "baseline"
        assert float(base[1]) == pytest.approx(3719.50, rel=1e-3)
        assert float(lines[2].split()[-1].rstrip("x")) == pytest.approx(3.2, abs=0.05)

    def test_identical_config_speedup_one(self, tmp_path):
        doc = dict(PRESETS["flux-baseline"], baseline=PRESETS["flux-baseline"]["stages"])
        path = tmp_path / "same.json"
        path.write_text(json.dumps(doc))
        assert main(["cost", "--config", str(path), "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(io.StringIO((tmp_path / "cost.csv").read_text())))
        assert [float(r["speedup"]) for r in rows] == [1.0, 1.0]


class TestScheduleCommand:
    def test_export(self, tmp_path):
        path = tmp_path / "sched.csv"
        assert main(["schedule", "--shifts", "1,3,5,7", "--steps", "50", "--out", str(path)]) == 0
        rows = list(csv.reader(io.StringIO(path.read_text(), newline="")))
        assert len(rows) == 52
        data = np.array(rows[1:], dtype=float)
        assert data.shape == (51, 5)

    def test_bad_shift(self, capsys):
        assert main(["schedule", "--shifts", "1,-3"]) == 2


class TestExitCodes:
    def test_verify_passes(self, capsys):
        assert main(["verify"]) == 0
        assert capsys.readouterr().out.count("PASS") == 4

    def test_perturbed_verify_fails(self, capsys):
        assert main(["verify", "--perturb-velocity", "1.1"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_usage_errors(self, capsys, tmp_path):
        assert main(["sample", "--preset", "paper-x3-desk"]) == 2  # --out missing
        assert main(["frobnicate"]) == 2
        assert main(["cost", "--bogus"]) == 2
        assert main(["cost"]) == 2
        assert main(["cost", "--preset", "nope"]) == 2
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(small_desk(kernel="area")))
        assert main(["cost", "--config", str(bad)]) == 2
