"""Tests for the experiment runner, configuration parsing and the command line."""

import csv
import io
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from bidirmmse.cli import main
from bidirmmse.harness import (
    ConfigError,
    ExperimentConfig,
    make_estimator,
    parse_config,
    run_analytical,
    run_experiment,
    run_sweep,
)
from bidirmmse.signal import SystemConfig


def small(**kw):
    system = kw.pop("system", SystemConfig(K=2, n_symbols=30, training_len=10))
    kw.setdefault("n_packets", 2)
    kw.setdefault("steady_start", 0)
    return ExperimentConfig(system=system, **kw)


def read_csv(text):
    return list(csv.reader(io.StringIO(text)))


class TestRunExperiment:
    def test_row_count(self):
        cfg = small(system=SystemConfig(K=2, n_symbols=10, training_len=5), n_packets=1, algorithms=("diff-cg",))
        rows = read_csv(run_experiment(cfg).to_csv())
        assert rows[0] == ["symbol_index", "algorithm_id", "sinr_over_snr_db", "cumulative_ber"]
        assert len(rows) == 11

    def test_paired_inputs(self):
        run = run_experiment(small(algorithms=("mmse", "conv-rls", "bidir-cg-mix")))
        hashes = list(run.input_hashes.values())
        assert all(h == hashes[0] for h in hashes)
        assert len(set(hashes[0])) == 2

    def test_deterministic(self):
        cfg = small(algorithms=("diff-nlms", "bidir-cg"))
        assert run_experiment(cfg).to_csv() == run_experiment(cfg).to_csv()

    def test_seed_changes_output(self):
        cfg = small(algorithms=("bidir-cg",))
        assert run_experiment(cfg).to_csv() != run_experiment(replace(cfg, seed=1)).to_csv()

    def test_parallel_matches_serial(self):
        cfg = small(algorithms=("conv-rls", "bidir-cg"), n_packets=3)
        assert run_experiment(cfg).to_csv() == run_experiment(replace(cfg, n_jobs=2)).to_csv()

    def test_mmse_is_upper_bound(self):
        run = run_experiment(small(algorithms=("mmse", "diff-cg", "bidir-cg"), n_packets=3))
        ss = run.steady_state(10)
        assert ss["mmse"] <= 0
        assert ss["mmse"] >= max(ss["diff-cg"], ss["bidir-cg"])

    def test_ber_counted_after_training(self):
        run = run_experiment(small(algorithms=("diff-cg",)))
        s = run.series["diff-cg"]
        assert s.bit_counts[:10].sum() == 0 and s.bits == 2 * 20

    def test_overrides_reach_estimator(self):
        est = make_estimator("bidir-cg-mix", 5, overrides={"bidir-cg-mix": {"lam": 0.9}})
        assert est.lam == 0.9 and est.weighting == "mixing"


class TestSweeps:
    def test_fading_sweep_rows(self):
        cfg = small(algorithms=("diff-cg",), sweep="vs_fading_rate", fading_rates=(0.001, 0.02), n_packets=1)
        rows = read_csv(run_sweep(cfg).to_csv())
        assert rows[0] == ["sweep_variable", "sweep_value", "algorithm_id", "sinr_over_snr_db", "ber"]
        assert [r[1] for r in rows[1:]] == ["0.001", "0.02"]

    def test_users_sweep(self):
        cfg = small(algorithms=("diff-cg",), sweep="vs_users", sweep_values=(1, 3), n_packets=1)
        table = run_sweep(cfg).table("ber")
        assert len(table["diff-cg"]) == 2

    def test_vs_symbol_is_not_a_sweep(self):
        with pytest.raises(ConfigError):
            run_sweep(small())


class TestAnalyticalRun:
    def test_curve_length(self):
        cfg = small(system=SystemConfig(K=2, n_symbols=40, training_len=10), algorithms=("mmse", "bidir-nlms"), n_packets=1)
        curve, run = run_analytical(cfg, 0.001, n_ensemble=200)
        assert curve.shape == (40,)
        assert set(run.series) == {"mmse", "bidir-nlms"}


class TestConfig:
    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            small(algorithms=("bogus",))

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            small(overrides={"bidir-cg": {"bogus": 1}})

    def test_parse_full(self):
        cfg = parse_config(
            """
            # comment
            K = 4
            snr_db = 10
            fd_ts = 0.001, 0.01
            algorithms = conv-rls, bidir-cg-mix
            n_packets = 3
            bidir-cg-mix.lam = 0.98
            cooperative = true
            n_relays = 3
            """
        )
        assert cfg.system.K == 4 and cfg.system.snr_db == 10
        assert cfg.fading_rates == (0.001, 0.01)
        assert cfg.algorithms == ("conv-rls", "bidir-cg-mix")
        assert cfg.overrides == {"bidir-cg-mix": {"lam": 0.98}}
        assert cfg.cooperative.n_relays == 3

    @pytest.mark.parametrize("text", ["bogus = 1", "K = abc", "K = 0", "fd_ts = -1", "algorithms = nope", "not a pair"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_digest_ignores_output(self):
        cfg = small()
        assert cfg.digest() == replace(cfg, output="x.csv").digest()
        assert cfg.digest() != replace(cfg, seed=3).digest()


class TestCli:
    def _args(self, tmp_path, name="out.csv", *extra):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("K = 2\nn_symbols = 30\ntraining_len = 10\nsteady_start = 0\n")
        return ["--config", str(cfg), "--packets", "1", "--out", str(tmp_path / name), *extra]

    def test_sinr_vs_symbol_deterministic(self, tmp_path):
        assert main(["sinr-vs-symbol", *self._args(tmp_path, "a.csv", "--seed", "7")]) == 0
        assert main(["sinr-vs-symbol", *self._args(tmp_path, "b.csv", "--seed", "7")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_fading_rates(self, tmp_path):
        assert main(["sinr-vs-fading", *self._args(tmp_path, "f.csv", "--algorithms", "diff-cg")]) == 0
        rates = {r[1] for r in read_csv((tmp_path / "f.csv").read_text())[1:]}
        assert {"0.001", "0.005", "0.01", "0.02"} <= rates

    def test_analytical_header(self, tmp_path):
        assert main(["analytical", *self._args(tmp_path, "an.csv")]) == 0
        rows = read_csv((tmp_path / "an.csv").read_text())
        assert rows[0] == ["fd_ts", "symbol_index", "algorithm_id", "sinr_over_snr_db"]
        assert {"analytical", "bidir-nlms"} <= {r[2] for r in rows[1:]}

    def test_bad_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["sinr-vs-symbol", "--bogus"])
        assert exc.value.code == 2

    def test_bad_algorithm(self, tmp_path):
        assert main(["sinr-vs-symbol", *self._args(tmp_path), "--algorithms", "nope"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["sinr-vs-symbol", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_bad_criteria(self):
        assert main(["validate", "--criteria", "99"]) == 2
        assert main(["validate", "--criteria", "x"]) == 2

    def test_validate_quick(self, capsys):
        assert main(["validate", "--quick"]) == 0
        out = capsys.readouterr().out
        assert "[FAIL]" not in out and out.count("[PASS]") >= 5

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "bidirmmse.cli", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "validate" in proc.stdout
