"""Command line interface: configs, experiment runs, verify grid, duality."""

import json
import math
import os

import numpy as np
import pytest

from gbpa.cli import ConfigError, ExperimentConfig, main, run_verify

GOOD = {
    "setting": "experts",
    "N": 3,
    "T": 8,
    "potential": "gaussian-mc",
    "schedule": "adaptive",
    "adversary": "rademacher",
    "mc_samples": 300,
    "seeds": [0, 1],
}


def write_config(tmp_path, name="exp.toml", **overrides):
    cfg = {**GOOD, **overrides}
    lines = ["[experiment]"]
    for key, value in cfg.items():
        if isinstance(value, str):
            lines.append(f'{key} = "{value}"')
        elif isinstance(value, list):
            lines.append(f"{key} = [{', '.join(str(v) for v in value)}]")
        else:
            lines.append(f"{key} = {value}")
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestExperimentConfig:
    def test_accepts_a_complete_dictionary(self):
        cfg = ExperimentConfig.from_dict(dict(GOOD))
        assert cfg.N == 3
        assert cfg.seeds == (0, 1)

    def test_missing_keys_are_named(self):
        data = dict(GOOD)
        del data["potential"]
        with pytest.raises(ConfigError, match="potential"):
            ExperimentConfig.from_dict(data)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            ExperimentConfig.from_dict({**GOOD, "tpyo": 1})

    def test_pairing_rules(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "setting": "l2ball", "potential": "ftrl-entropy"})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "potential": "ftrl-quadratic"})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "setting": "interval", "N": 2})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "schedule": "hindsight", "adversary": "greedy"})

    def test_schedule_strings(self):
        assert ExperimentConfig.from_dict({**GOOD, "schedule": "fixed:0.5"}).schedule == "fixed:0.5"
        for bad in ("fixed", "fixed:zero", "fixed:-1", "sometimes"):
            with pytest.raises(ConfigError):
                ExperimentConfig.from_dict({**GOOD, "schedule": bad})

    def test_seed_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "seeds": []})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "seeds": [-1]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**GOOD, "seeds": [True]})

    def test_toml_round_trip_is_lossless(self, tmp_path):
        cfg = ExperimentConfig.from_dict({**GOOD, "norm_budget": 0.75, "out_dir": "runs/x"})
        path = tmp_path / "roundtrip.toml"
        path.write_text(cfg.to_toml())
        again = ExperimentConfig.from_toml(str(path))
        assert again == cfg

    def test_unknown_toml_key_reports_the_line(self, tmp_path):
        path = write_config(tmp_path, extra_knob=3)
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_toml(path)
        message = str(err.value)
        assert "unknown key 'extra_knob'" in message
        # the anchor is path:line for a key that exists in the file
        prefix = message.split(":")[0:2]
        assert prefix[0] == path
        assert prefix[1].isdigit()

    def test_missing_or_extra_tables_rejected(self, tmp_path):
        empty = tmp_path / "empty.toml"
        empty.write_text("")
        with pytest.raises(ConfigError, match="experiment"):
            ExperimentConfig.from_toml(str(empty))
        extra = tmp_path / "extra.toml"
        extra.write_text("[experiment]\n[other]\n")
        with pytest.raises(ConfigError, match="unknown table"):
            ExperimentConfig.from_toml(str(extra))

    def test_missing_file_and_bad_syntax(self, tmp_path):
        with pytest.raises(ConfigError, match="no such file"):
            ExperimentConfig.from_toml(str(tmp_path / "nope.toml"))
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(str(bad))


class TestRunCommand:
    def test_happy_path_writes_summary_and_traces(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["run", config, "--out-dir", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        agg = summary["aggregate"]
        assert agg["seeds"] == 2
        assert agg["max_abs_residual"] <= 1e-9
        assert agg["mean_regret_within_bound"] is True
        assert (out / "trace_seed0.csv").exists()
        assert (out / "trace_seed1.csv").exists()

    def test_reruns_are_byte_identical(self, tmp_path, capsys):
        config = write_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", config, "--out-dir", str(a)]) == 0
        assert main(["run", config, "--out-dir", str(b)]) == 0
        assert (a / "trace_seed0.csv").read_bytes() == (b / "trace_seed0.csv").read_bytes()
        assert (a / "trace_seed1.csv").read_bytes() == (b / "trace_seed1.csv").read_bytes()

    def test_env_var_supplies_the_output_directory(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path / "from_env"))
        config = write_config(tmp_path)
        assert main(["run", config]) == 0
        assert (tmp_path / "from_env" / "summary.json").exists()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path, adversary="chaotic")
        assert main(["run", config, "--out-dir", str(tmp_path / "x")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_hindsight_greedy_rejected_before_any_work(self, tmp_path, capsys):
        config = write_config(tmp_path, schedule="hindsight", adversary="greedy")
        out = tmp_path / "never"
        assert main(["run", config, "--out-dir", str(out)]) == 2
        assert not out.exists()


class TestVerifyCommand:
    def test_json_lines_and_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "reports.jsonl"
        code = main([
            "verify", "maxgauss", "--N", "2", "--samples", "50000", "--out", str(out),
        ])
        captured = capsys.readouterr()
        assert code == 0
        lines = [json.loads(line) for line in captured.out.strip().splitlines()]
        assert all(line["passed"] for line in lines)
        assert "checks passed" in captured.err
        assert out.read_text().strip() == captured.out.strip()

    def test_grid_restriction_pins_the_bound(self, capsys):
        code = main(["verify", "hessian-l2", "--N", "4", "--eta", "2", "--samples", "5000"])
        captured = capsys.readouterr()
        assert code == 0
        lines = [json.loads(line) for line in captured.out.strip().splitlines()]
        bounds = [l["bound"] for l in lines if l["name"] == "hessian-l2-bound"]
        assert bounds and all(b == 0.25 for b in bounds)

    def test_whole_grid_passes_at_default_budget(self):
        reports = run_verify("all", (1, 2, 5), (0.5, 1.0), samples=20_000, seed=0)
        assert reports
        failing = [r.name for r in reports if not r.passed]
        assert failing == []

    def test_simplex_generic_reports_carry_the_entropic_reference(self):
        reports = run_verify("generic", (4,), (1.0,), samples=2000, seed=0)
        simplex = [r for r in reports if r.config["set"]["kind"] == "simplex"]
        assert simplex
        for report in simplex:
            ref = report.config["entropic_reference"]
            assert ref["alpha"] == pytest.approx(math.log(4.0), abs=1e-12)

    def test_unknown_selector_is_an_argparse_error(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["verify", "everything"])
        assert err.value.code == 2


class TestDualityCommand:
    def test_to_ftrl_logistic_reports_binary_entropy_values(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        report_path = tmp_path / "report.json"
        code = main([
            "duality", "to-ftrl", "logistic", "--K", "1000", "--report", str(report_path),
        ])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["R_at_half"] == pytest.approx(-math.log(2.0), abs=1e-3)
        table = tmp_path / "regularizer.csv"
        assert table.read_text().splitlines()[0] == "w,R"

    def test_to_ftpl_consumes_the_emitted_table(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        assert main(["duality", "to-ftrl", "gaussian", "--K", "500"]) == 0
        code = main(["duality", "to-ftpl", str(tmp_path / "regularizer.csv")])
        assert code == 0
        cdf_table = (tmp_path / "cdf.csv").read_text().splitlines()
        assert cdf_table[0] == "x,F"
        values = np.array([float(row.split(",")[1]) for row in cdf_table[1:]])
        assert float(np.diff(values).min()) >= -1e-9

    def test_roundtrip_uniform_passes(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        report_path = tmp_path / "rt.json"
        code = main(["duality", "roundtrip", "uniform", "--report", str(report_path)])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["passed"] is True
        assert report["sup_error"] <= 1e-3

    def test_gumbel_hedge_agrees_with_softmax(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        report_path = tmp_path / "gh.json"
        code = main([
            "duality", "gumbel-hedge", "--theta", "1,0", "--M", "50000",
            "--report", str(report_path),
        ])
        assert code == 0
        report = json.loads(report_path.read_text())
        assert report["passed"] is True
        assert report["softmax"][0] == pytest.approx(math.e / (math.e + 1.0), abs=1e-9)
        table = tmp_path / "frequencies.csv"
        assert table.read_text().splitlines()[0] == "i,frequency"

    def test_gumbel_hedge_requires_theta(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        assert main(["duality", "gumbel-hedge"]) == 2
        assert "--theta" in capsys.readouterr().err

    def test_table_cdf_source(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        # span past the quantile clamp at 1/(10K) so the tails stay strictly
        # increasing after tabulation
        xs = np.linspace(-10.0, 10.0, 401)
        Fs = 1.0 / (1.0 + np.exp(-xs))
        table = tmp_path / "cdf_in.csv"
        table.write_text("x,F\n" + "\n".join(f"{float(x)!r},{float(F)!r}" for x, F in zip(xs, Fs)) + "\n")
        report_path = tmp_path / "table_rt.json"
        code = main(["duality", "roundtrip", str(table), "--report", str(report_path)])
        assert code == 0
        assert json.loads(report_path.read_text())["passed"] is True

    def test_wrong_table_header_exits_2(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        bad = tmp_path / "bad.csv"
        bad.write_text("u,G\n0.0,0.0\n1.0,1.0\n")
        assert main(["duality", "to-ftrl", str(bad)]) == 2
        assert "expected header" in capsys.readouterr().err

    def test_missing_source_exits_2(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("GBPA_OUT_DIR", str(tmp_path))
        assert main(["duality", "roundtrip"]) == 2
