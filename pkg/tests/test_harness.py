import json
import math

import numpy as np
import pytest

from micropolar import linear_system
from micropolar.harness import scaling as sc
from micropolar.harness.cli import main
from micropolar.harness.config import (
    OUT_ENV,
    ConfigError,
    ExperimentConfig,
    parse_amp,
    parse_box,
    parse_dims,
    parse_length,
)
from micropolar.harness.csvio import CSVParseError, read_table, write_table
from micropolar.harness.report import ReportError, summarize
from micropolar.initial_data import default_box

SMALL_CONFIG = """
[grid]
dims = 16x16x16

[time]
dt = 0.01
t_end = 0.05
stride = 1
"""


class TestConfigParsing:
    def test_lengths(self):
        assert parse_length("16pi") == pytest.approx(16 * math.pi)
        assert parse_length("pi") == pytest.approx(math.pi)
        assert parse_length("2.5") == 2.5
        with pytest.raises(ConfigError):
            parse_length("two")

    def test_dims(self):
        assert parse_dims("32x16x8") == (32, 16, 8)
        for bad in ("32x16", "31x16x16", "axbxc", "0x2x2"):
            with pytest.raises(ConfigError):
                parse_dims(bad)

    def test_box(self):
        assert parse_box("auto", 0.25) == default_box(0.25)
        assert parse_box("2pi, 2pi, 4", 0.25) == pytest.approx((2 * math.pi, 2 * math.pi, 4.0))
        with pytest.raises(ConfigError):
            parse_box("1,2", 0.25)
        with pytest.raises(ConfigError):
            parse_box("1,-2,3", 0.25)

    def test_amp(self):
        assert parse_amp("Large") == "large" and parse_amp("3") == 3.0
        with pytest.raises(ConfigError):
            parse_amp("loud")

    def test_defaults(self):
        cfg = ExperimentConfig.default()
        assert cfg.eps == 0.25 and cfg.p == 5.0 and cfg.seed == 20240501
        assert len(cfg.eps_list) == 5

    def test_from_text_overrides_and_aliases(self):
        cfg = ExperimentConfig.from_text("[data]\neps = 0.125\n[time]\nscheme = ifrk4\n")
        assert cfg.eps == 0.125 and cfg.scheme == "integrating-factor-rk4"

    @pytest.mark.parametrize(
        "text",
        ["[data]\neps = 0.5\n", "[data]\np = 6\n", "[time]\ndt = 0\n", "[time]\nscheme = euler\n", "[data]\neps = x\n"],
    )
    def test_invalid_text(self, text):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "nope.ini")

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "elsewhere"))
        assert ExperimentConfig.default().output_root() == tmp_path / "elsewhere"
        monkeypatch.delenv(OUT_ENV)
        assert str(ExperimentConfig.default().output_root()) == "runs"


class TestCSV:
    def test_round_trip_and_header(self, tmp_path):
        path = write_table(tmp_path / "t.csv", "demo", ["a", "b"], [[1, 0.1], [2, math.inf]])
        lines = path.read_text().splitlines()
        assert lines[0] == "#schema=demo/1" and lines[1] == "a,b"
        table = read_table(path, "demo")
        assert table.column("a") == [1, 2] and table.column("b") == [0.1, math.inf]

    def test_floats_exact(self, tmp_path):
        x = 0.1 + 0.2
        path = write_table(tmp_path / "f.csv", "demo", ["x"], [[x]])
        assert read_table(path).column("x")[0] == x

    def test_row_length_checked_on_write(self, tmp_path):
        with pytest.raises(ValueError):
            write_table(tmp_path / "w.csv", "demo", ["a", "b"], [[1]])

    def test_truncated_row_names_line(self, tmp_path):
        path = write_table(tmp_path / "t.csv", "demo", ["a", "b", "c"], [[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        text = path.read_text().splitlines()
        text[3] = "4,5"
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(CSVParseError) as err:
            read_table(path)
        assert err.value.line == 4 and ":4:" in str(err.value)

    def test_schema_mismatch(self, tmp_path):
        path = write_table(tmp_path / "s.csv", "demo", ["a"], [[1]])
        with pytest.raises(CSVParseError):
            read_table(path, "other")
        path.write_text("a\n1\n")
        with pytest.raises(CSVParseError):
            read_table(path)


class TestScalingModule:
    def test_single_eps_has_no_fit(self):
        rows = sc.sweep([0.125], 5.0, 1.0, "large")
        assert sc.fit_exponents(rows, 5.0) == []

    def test_lp_dual_fit_passes(self):
        rows = sc.sweep([2.0**-k for k in range(3, 8)], 5.0, 1.0, "large")
        fits = {f.quantity: f for f in sc.fit_exponents(rows, 5.0)}
        lp = next(f for name, f in fits.items() if "lp_dual" in name)
        assert lp.passed and lp.expected == pytest.approx(-0.4)
        assert sc.omega_band(rows) <= 2.0


class TestCLI:
    def test_missing_config_exits_2(self, tmp_path, capsys):
        assert main(["verify", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path)]) == 2
        assert "error" in capsys.readouterr().err

    def test_bad_usage_exits_2(self, tmp_path):
        assert main(["initdata", "--eps", "0.5", "--out", str(tmp_path)]) == 2
        assert main(["initdata", "--grid", "15x16x16", "--out", str(tmp_path)]) == 2

    def test_initdata(self, tmp_path, capsys):
        assert main(["initdata", "--snapshot", "--out", str(tmp_path)]) == 0
        table = read_table(tmp_path / "initdata.csv", "micropolar-initdata")
        assert table.column("inside_C") == [1]
        assert table.column("omega_identity_defect")[0] < 1e-8
        assert {p.name for p in tmp_path.glob("*.mpsf")} == {"a0.mpsf", "U0.mpsf", "W0.mpsf"}
        assert "inside C: True" in capsys.readouterr().out

    def test_linear(self, tmp_path):
        assert main(["linear", "--t-max", "1", "--t-samples", "3", "--out", str(tmp_path)]) == 0
        cert = json.loads((tmp_path / "decay_certificate.json").read_text())
        assert cert["passed"] and cert["K_measured"] <= 4.0
        assert len(read_table(tmp_path / "smallness.csv").rows) == 3

    def test_mps_out_used_when_no_out_flag(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUT_ENV, str(tmp_path))
        assert main(["linear", "--t-max", "1", "--t-samples", "2"]) == 0
        assert (tmp_path / "linear" / "smallness.csv").is_file()

    def test_simulate_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "small.ini"
        cfg.write_text(SMALL_CONFIG)
        run = tmp_path / "run"
        assert main(["simulate", "--config", str(cfg), "--amp", "unit", "--grid", "56x56x56", "--out", str(run)]) == 0
        assert "no Γ-crossing, no blowup" in capsys.readouterr().out
        table = read_table(run / "diagnostics.csv", "micropolar-diagnostics")
        assert table.column("t")[-1] == pytest.approx(0.05) and len(table.rows) == 6
        first = (run / "summary.txt").read_text()
        assert main(["report", str(run)]) == 0
        assert (run / "summary.txt").read_text() == first

    def test_simulate_outputs_deterministic(self, tmp_path):
        cfg = tmp_path / "small.ini"
        cfg.write_text(SMALL_CONFIG)
        outs = []
        for name in ("a", "b"):
            args = ["simulate", "--config", str(cfg), "--amp", "unit", "--grid", "56x56x56", "--pert-amp", "0.01"]
            assert main(args + ["--out", str(tmp_path / name)]) == 0
            outs.append((tmp_path / name / "diagnostics.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_report_errors(self, tmp_path):
        assert main(["report", str(tmp_path / "none")]) == 2
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", str(empty)]) == 2

    def test_report_truncated_row(self, tmp_path, capsys):
        run = tmp_path / "run"
        cols = ["t", "monitor", "dissipation_integral", "dissipation_rate", "u_linf", "energy", "div_u", "div_v",
                "gamma_crossed", "blowup"]
        write_table(run / "diagnostics.csv", "micropolar-diagnostics", cols, [[0.0] * 8 + [0, 0], [0.1] * 8 + [0, 0]])
        text = (run / "diagnostics.csv").read_text().splitlines()
        text[3] = "0.1,0.1"
        (run / "diagnostics.csv").write_text("\n".join(text) + "\n")
        assert main(["report", str(run)]) == 2
        assert ":4:" in capsys.readouterr().err

    def test_report_verdicts(self, tmp_path):
        cols = ["t", "monitor", "dissipation_integral", "dissipation_rate", "u_linf", "energy", "div_u", "div_v",
                "gamma_crossed", "blowup"]
        run = tmp_path / "cross"
        write_table(run / "diagnostics.csv", "micropolar-diagnostics", cols,
                    [[0.0] * 8 + [0, 0], [0.5] + [1.0] * 7 + [1, 0]])
        text, stats = summarize(run)
        assert stats["crossing_time"] == 0.5 and "Γ-crossing at t = 0.5" in text
        with pytest.raises(ReportError):
            summarize(tmp_path / "missing")

    def test_scaling_single_eps(self, tmp_path, capsys):
        assert main(["scaling", "--eps-list", "0.125", "--out", str(tmp_path)]) == 0
        assert "raw values only" in capsys.readouterr().out

    def test_scaling_sweep_writes_fits(self, tmp_path):
        assert main(["scaling", "--out", str(tmp_path)]) == 0
        fits = read_table(tmp_path / "fits.csv")
        assert len(fits.rows) >= 3
        assert len(read_table(tmp_path / "scaling.csv").rows) == 5


class TestVerify:
    def test_default_config_passes(self, tmp_path):
        assert main(["verify", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "verify.json").read_text())
        assert report["passed"] and report["failed"] == []

    def test_byte_identical_reports(self, tmp_path):
        for name in ("a", "b"):
            assert main(["verify", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "verify.json").read_bytes() == (tmp_path / "b" / "verify.json").read_bytes()

    def test_sign_flip_in_F_is_caught(self, tmp_path, monkeypatch, capsys):
        original = linear_system.forcing_F

        def flipped(state):
            F = original(state)
            return F._wrap(-F.coeffs)

        monkeypatch.setattr(linear_system, "forcing_F", flipped)
        assert main(["verify", "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "linear_system.ml2_F_cancellation" in err

    def test_unknown_check_name(self, tmp_path):
        assert main(["verify", "--check", "nope", "--out", str(tmp_path)]) == 2

    def test_single_check(self, tmp_path):
        assert main(["verify", "--check", "grid.parseval", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "verify.json").read_text())
        assert [c["name"] for c in report["checks"]] == ["grid.parseval"]


def test_random_fields_seeded_by_name():
    from micropolar.grid import WaveGrid, random_field

    g = WaveGrid((8, 8, 8))
    assert np.array_equal(random_field(g, 5, "x").coeffs, random_field(g, 5, "x").coeffs)
