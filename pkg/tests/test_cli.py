import json

import pytest

from hdsa.bundle import CSV_FILES, BundleError, read_bundle
from hdsa.cli import EXIT_COMPUTE, EXIT_OK, EXIT_USAGE, main
from hdsa.config import ConfigError, load_config, parse_config


def logistic_config(out_dir, n_samples=2, seed=42, **extra):
    cfg = {
        "problem": {"name": "logistic_toy", "params": {}},
        "optimizer": {},
        "hdsa": {
            "n_samples": n_samples,
            "k_pairs": 1,
            "oversampling": 2,
            "seed": seed,
        },
        "sampling": {"distribution": {"kind": "uniform", "a": 0.4, "b": 0.6}},
        "output_dir": str(out_dir),
    }
    cfg.update(extra)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


class TestConfigParsing:
    def test_unknown_top_level_key_rejected(self, tmp_path):
        cfg = logistic_config(tmp_path / "out")
        cfg["surprise"] = 1
        with pytest.raises(ConfigError, match="surprise"):
            parse_config(cfg)

    def test_unknown_problem_param_rejected(self, tmp_path):
        cfg = logistic_config(tmp_path / "out")
        cfg["problem"]["params"] = {"n_state": 10}
        with pytest.raises(ConfigError, match="n_state"):
            parse_config(cfg)

    def test_missing_output_dir_rejected(self, tmp_path):
        cfg = logistic_config(tmp_path / "out")
        del cfg["output_dir"]
        with pytest.raises(ConfigError, match="output_dir"):
            parse_config(cfg)

    def test_wrong_type_rejected(self, tmp_path):
        cfg = logistic_config(tmp_path / "out")
        cfg["hdsa"]["n_samples"] = "five"
        with pytest.raises(ConfigError, match="n_samples"):
            parse_config(cfg)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "problem": \n}')
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_relative_output_dir_resolved_against_config(self, tmp_path):
        cfg = logistic_config("results")
        path = write_config(tmp_path, cfg)
        parsed = load_config(path)
        assert parsed.output_dir == tmp_path / "results"

    def test_hdsa_seed_env_override(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, logistic_config(tmp_path / "out", seed=42))
        monkeypatch.setenv("HDSA_SEED", "777")
        assert load_config(path).randeig.seed == 777
        monkeypatch.setenv("HDSA_SEED", "not-a-number")
        with pytest.raises(ConfigError, match="HDSA_SEED"):
            load_config(path)
        monkeypatch.delenv("HDSA_SEED")
        assert load_config(path).randeig.seed == 42


class TestRunCommand:
    def test_run_writes_complete_bundle(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, logistic_config(out))
        assert main(["run", str(path)]) == EXIT_OK
        manifest, report = read_bundle(out)
        assert manifest["seed"] == 42
        assert report["n_samples_completed"] == 2
        for name in CSV_FILES:
            assert (out / name).is_file()

    def test_non_empty_output_needs_force(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, logistic_config(out))
        assert main(["run", str(path)]) == EXIT_OK
        assert main(["run", str(path)]) == EXIT_USAGE
        assert main(["run", str(path), "--force"]) == EXIT_OK

    def test_bad_config_is_usage_error(self, tmp_path):
        cfg = logistic_config(tmp_path / "out")
        cfg["hdsa"]["set_index_mode"] = "bogus"
        path = write_config(tmp_path, cfg)
        assert main(["run", str(path)]) == EXIT_USAGE

    def test_worker_count_gives_identical_bytes(self, tmp_path):
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        p1 = write_config(tmp_path, logistic_config(out1, n_samples=4), "c1.json")
        p2 = write_config(tmp_path, logistic_config(out2, n_samples=4), "c2.json")
        assert main(["run", str(p1), "--workers", "1"]) == EXIT_OK
        assert main(["run", str(p2), "--workers", "3"]) == EXIT_OK
        for name in CSV_FILES + ("report.json",):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_invalid_worker_count(self, tmp_path):
        path = write_config(tmp_path, logistic_config(tmp_path / "out"))
        assert main(["run", str(path), "--workers", "0"]) == EXIT_USAGE


class TestReportCommand:
    def test_round_trip(self, tmp_path, capsys):
        out = tmp_path / "out"
        path = write_config(tmp_path, logistic_config(out))
        assert main(["run", str(path)]) == EXIT_OK
        capsys.readouterr()
        assert main(["report", str(out)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "set sensitivity indices" in text
        assert "spectral decay" in text

    def test_missing_bundle_is_usage_error(self, tmp_path):
        assert main(["report", str(tmp_path / "nowhere")]) == EXIT_USAGE

    def test_corrupt_manifest_detected(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, logistic_config(out))
        assert main(["run", str(path)]) == EXIT_OK
        (out / "manifest.json").write_text("{ not json")
        with pytest.raises(BundleError):
            read_bundle(out)
        assert main(["report", str(out)]) == EXIT_USAGE

    def test_missing_listed_file_detected(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path, logistic_config(out))
        assert main(["run", str(path)]) == EXIT_OK
        (out / "singular_values.csv").unlink()
        assert main(["report", str(out)]) == EXIT_USAGE


class TestVerifyCommand:
    def test_verify_passes_on_sound_problem(self, tmp_path, capsys):
        cfg = logistic_config(tmp_path / "out")
        cfg["perturbation_deltas"] = [1e-2, 1e-3, 1e-4]
        path = write_config(tmp_path, cfg)
        assert main(["verify", str(path)]) == EXIT_OK
        text = capsys.readouterr().out
        assert "PASS" in text and "FAIL" not in text

    def test_verify_catches_wrong_derivative(self, tmp_path, capsys):
        cfg = logistic_config(tmp_path / "out")
        cfg["problem"]["params"] = {"corrupt_derivative": True}
        path = write_config(tmp_path, cfg)
        assert main(["verify", str(path)]) == EXIT_COMPUTE
        assert "FAIL" in capsys.readouterr().out

    def test_usage_errors(self, tmp_path):
        assert main(["verify", str(tmp_path / "missing.json")]) == EXIT_USAGE
        assert main([]) == EXIT_USAGE
        assert main(["frobnicate"]) == EXIT_USAGE
