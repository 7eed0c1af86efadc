import json

import pytest
from click.testing import CliRunner

from spinweave.cli import main
from spinweave.harness import (
    ConfigError,
    config_digest,
    run_preset,
    run_sweep,
    sweep_rows_to_csv,
    sweep_rows_to_json,
    validate_config,
)

TINY_SWEEP = {
    "sequences": ["WHH"],
    "n_spins": 2,
    "n_coupling_sets": 2,
    "sweep": {"parameter": "tau_s", "grid": [2e-6, 4e-6]},
    "base_seed": 7,
}


class TestValidateConfig:
    def test_empty_config_echoes_full_size_defaults(self):
        cfg = validate_config({})
        doc = cfg.document
        assert doc["n_spins"] == 8
        assert doc["n_coupling_sets"] == 16
        assert doc["coupling_sigma_hz"] == pytest.approx(5000.0 / 3.0)
        assert doc["base_seed"] == 2026
        assert set(doc["sequences"]) == {
            "WHH", "MREV8", "MREV16", "BR24", "CORY48", "YXX24", "YXX48",
        }

    def test_round_trips_through_loader(self):
        cfg = validate_config(TINY_SWEEP)
        again = validate_config(cfg.document)
        assert again.document == cfg.document
        assert config_digest(again.document) == config_digest(cfg.document)

    def test_rejects_too_many_spins(self):
        with pytest.raises(ConfigError, match="n_spins"):
            validate_config({"n_spins": 12})

    def test_rejects_descending_grid(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            validate_config({"sweep": {"parameter": "tau_s", "grid": [4e-6, 2e-6]}})

    def test_rejects_unknown_fields_and_sequences(self):
        with pytest.raises(ConfigError) as err:
            validate_config({"spins": 4, "sequences": ["WHH", "NOPE"]})
        text = str(err.value)
        assert "unknown fields" in text and "NOPE" in text

    def test_error_list_aggregates(self):
        with pytest.raises(ConfigError) as err:
            validate_config(
                {"n_spins": 1, "tau_s": -1.0, "sweep": {"parameter": "bogus", "grid": []}}
            )
        assert len(err.value.errors) >= 3

    def test_rejects_empty_and_nonfinite_grids(self):
        with pytest.raises(ConfigError, match="empty"):
            validate_config({"sweep": {"parameter": "tau_s", "grid": []}})
        with pytest.raises(ConfigError, match="non-finite"):
            validate_config({"sweep": {"parameter": "tau_s", "grid": [1e-6, float("inf")]}})


class TestEmission:
    def test_empty_rows_give_header_only(self):
        cfg = validate_config(TINY_SWEEP)
        text = sweep_rows_to_csv(cfg, [])
        lines = text.strip().splitlines()
        assert lines[-1].startswith("sweep_param,")
        assert len([l for l in lines if not l.startswith("#")]) == 1

    def test_rerun_is_byte_identical(self):
        cfg = validate_config(TINY_SWEEP)
        a = sweep_rows_to_csv(cfg, run_sweep(cfg, threads=1))
        b = sweep_rows_to_csv(cfg, run_sweep(cfg, threads=2))
        assert a == b

    def test_json_round_trips_through_config_loader(self):
        cfg = validate_config(TINY_SWEEP)
        rows = run_sweep(cfg, threads=1)
        doc = sweep_rows_to_json(cfg, rows)
        assert validate_config(doc["config"]).document == cfg.document
        assert doc["config_sha256"] == config_digest(cfg.document)
        assert len(doc["rows"]) == 2

    def test_csv_embeds_config(self):
        cfg = validate_config(TINY_SWEEP)
        text = sweep_rows_to_csv(cfg, run_sweep(cfg, threads=1))
        config_line = [l for l in text.splitlines() if l.startswith("# config: ")][0]
        embedded = json.loads(config_line[len("# config: "):])
        assert validate_config(embedded).document == cfg.document


class TestPresets:
    def test_unknown_preset(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown preset"):
            run_preset("fig99", outdir=tmp_path)

    def test_bad_profile(self, tmp_path):
        with pytest.raises(ConfigError, match="profile"):
            run_preset("fig2a", profile="huge", outdir=tmp_path)

    def test_figA3_structure(self, tmp_path):
        (path,) = run_preset("figA3", profile="ci", outdir=tmp_path)
        doc = json.loads(path.read_text())
        assert doc["config"]["preset"] == "figA3"
        terms = {(r["sequence"], r["term"], r["order"]) for r in doc["rows"]}
        assert ("WHH", "dipolar", 4) in terms
        assert ("CORY48", "cross", 1) in terms
        assert len({s for s, _, _ in terms}) == 7


class TestCli:
    def setup_method(self):
        self.runner = CliRunner()

    def test_seq_lint_builtin(self):
        result = self.runner.invoke(main, ["seq", "lint", "MREV8"])
        assert result.exit_code == 0
        assert "windows (M): 12" in result.output
        assert "pulses: 8" in result.output
        assert "cyclic: yes" in result.output
        assert "row sums" in result.output

    def test_seq_lint_file_and_noncyclic_exit_code(self, tmp_path):
        good = tmp_path / "solid_echo_pair.seq"
        good.write_text("# two opposing pulses\ntau - x - tau - -x - tau\n")
        result = self.runner.invoke(main, ["seq", "lint", str(good)])
        assert result.exit_code == 0
        bad = tmp_path / "bad.seq"
        bad.write_text("tau - x - tau\n")
        result = self.runner.invoke(main, ["seq", "lint", str(bad)])
        assert result.exit_code == 3

    def test_seq_lint_unknown_source(self):
        result = self.runner.invoke(main, ["seq", "lint", "NOSUCH"])
        assert result.exit_code == 2

    def test_sweep_with_overrides(self, tmp_path):
        out = tmp_path / "rows.csv"
        result = self.runner.invoke(
            main,
            [
                "sweep",
                "--set", 'sequences=["WHH"]',
                "--set", "n_spins=2",
                "--set", "n_coupling_sets=1",
                "--set", 'sweep={"parameter": "tau_s", "grid": [2e-6, 4e-6]}',
                "--output", str(out),
                "--threads", "1",
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[-1].split(",")[0] == "tau_s"

    def test_sweep_bad_config_exits_2(self, tmp_path):
        result = self.runner.invoke(main, ["sweep", "--set", "n_spins=40"])
        assert result.exit_code == 2

    def test_aht_terms_json(self):
        result = self.runner.invoke(
            main, ["aht", "terms", "--seq", "WHH", "--orders", "2", "--spins", "2"]
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert [t["order"] for t in doc["terms"]] == [0, 1, 2]
        for term in doc["terms"]:
            assert set(term) == {
                "order",
                "magnitude_dipolar_normalized",
                "trace_residual",
                "hermiticity_residual",
            }

    def test_exp_autocorr_with_fit(self, tmp_path):
        out = tmp_path / "ac.csv"
        result = self.runner.invoke(
            main,
            [
                "exp", "autocorr", "--seq", "WHH", "--spins", "2",
                "--blocks", "0,1,2,4,8,16,32",
                "--fit", "stretched",
                "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
        assert header == "time_s,c_xx,c_yy,c_zz,c_avg"
        fit_doc = json.loads((tmp_path / "ac.csv.fit.json").read_text())
        assert fit_doc["model"] == "stretched"

    def test_exp_mqc(self, tmp_path):
        out = tmp_path / "mqc.csv"
        result = self.runner.invoke(
            main,
            [
                "exp", "mqc", "--spins", "3", "--tau-dq", "1e-4",
                "--window", "free:1e-4", "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        body = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert body[0] == "order,intensity"
        assert len(body) == 1 + 7  # orders -3..3
        assert (tmp_path / "mqc.csv.signal.csv").exists()

    def test_exp_mqc_bad_window(self):
        result = self.runner.invoke(
            main, ["exp", "mqc", "--spins", "2", "--window", "sideways:1"]
        )
        assert result.exit_code == 2

    def test_preset_unknown_exits_2(self, tmp_path):
        result = self.runner.invoke(main, ["preset", "fig99", "--outdir", str(tmp_path)])
        assert result.exit_code == 2

    def test_preset_figA3(self, tmp_path):
        result = self.runner.invoke(main, ["preset", "figA3", "--outdir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "figA3.json").exists()
