import json
import subprocess
import sys

import pytest

from wbansim.cli import main
from wbansim.metrics import read_metrics_csv
from wbansim.sweep import parse_sweep_text, read_summary_csv, run_sweep


class TestSimulate:
    def test_writes_csv_and_exits_zero(self, tmp_path, capsys):
        code = main(["simulate", "--scheme", "or", "--seed", "4",
                     "--duration", "2.0", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        csv_path = tmp_path / "run_or_thr-45.0_seed4.csv"
        assert csv_path.exists()
        assert str(csv_path) in out
        assert read_metrics_csv(csv_path)

    def test_trace_written_as_jsonl(self, tmp_path):
        code = main(["simulate", "--seed", "4", "--duration", "1.0",
                     "--out", str(tmp_path), "--trace"])
        assert code == 0
        trace = (tmp_path / "run_iaa_thr-45.0_seed4.trace.jsonl")
        lines = trace.read_text().splitlines()
        assert lines
        for line in lines[:20]:
            json.loads(line)

    def test_config_file_plus_flag_override(self, tmp_path, capsys):
        cfg_file = tmp_path / "sim.cfg"
        cfg_file.write_text("duration_s = 1.0\nscheme = or\nn_sources = 4\n")
        code = main(["simulate", "--config", str(cfg_file), "--scheme", "pc",
                     "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "run_pc_thr-45.0_seed1.csv").exists()

    def test_invalid_config_exits_two(self, tmp_path, capsys):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("n_sources = 0\n")
        code = main(["simulate", "--config", str(cfg_file),
                     "--duration", "1.0", "--out", str(tmp_path)])
        assert code == 2
        assert "n_sources" in capsys.readouterr().err

    def test_missing_config_file_exits_two(self, tmp_path):
        code = main(["simulate", "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path)])
        assert code == 2

    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "wbansim.cli", "--help"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "simulate" in proc.stdout


class TestAnalyzeOutage:
    def test_stdout_csv(self, capsys):
        code = main(["analyze", "outage", "--dist", "uniform:2", "--n", "8",
                     "--thresholds", "1.0,2.0", "--trials", "20000"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("threshold,p_out,p_pr")
        assert len(lines) == 3

    def test_file_output(self, tmp_path):
        out = tmp_path / "outage.csv"
        code = main(["analyze", "outage", "--thresholds", "1.0",
                     "--trials", "10000", "--out", str(out)])
        assert code == 0
        assert out.read_text().count("\n") == 2


class TestSweep:
    def test_mini_sweep_files(self, tmp_path):
        spec_file = tmp_path / "sweep.cfg"
        spec_file.write_text("""
schemes = iaa, or
thresholds_db = -45
seeds = 1..2
workers = 1
duration_s = 1.0
metrics_window_s = 0.5
""")
        code = main(["sweep", "--spec", str(spec_file),
                     "--out", str(tmp_path / "out")])
        assert code == 0
        out = tmp_path / "out"
        runs = sorted(p.name for p in out.glob("run_*.csv"))
        assert len(runs) == 4
        assert (out / "summary.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seeds"] == [1, 2]
        assert sorted(manifest["files"]) == runs

    def test_rerun_byte_identical(self, tmp_path):
        spec = parse_sweep_text(
            "schemes = pc\nseeds = 3\nduration_s = 1.0\nworkers = 1\n",
            out_dir=str(tmp_path / "a"))
        run_sweep(spec)
        spec_b = parse_sweep_text(
            "schemes = pc\nseeds = 3\nduration_s = 1.0\nworkers = 1\n",
            out_dir=str(tmp_path / "b"))
        run_sweep(spec_b)
        name = "run_pc_thr-45.0_seed3.csv"
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes()

    def test_summary_mean_matches_per_seed_values(self, tmp_path):
        spec = parse_sweep_text(
            "schemes = or\nseeds = 1,2,3\nduration_s = 2.0\nworkers = 1\n",
            out_dir=str(tmp_path))
        summary_path = run_sweep(spec)
        per_seed = {
            seed: read_metrics_csv(tmp_path / f"run_or_thr-45.0_seed{seed}.csv")
            for seed in (1, 2, 3)}
        for row in read_summary_csv(summary_path):
            t = row["time_s"]
            vals = [r.energy_residue_j for s in (1, 2, 3)
                    for r in per_seed[s] if r.time_s == t]
            assert row["energy_residue_j_mean"] == pytest.approx(
                sum(vals) / len(vals), abs=1e-9)

    def test_sweep_spec_validation(self):
        with pytest.raises(Exception):
            parse_sweep_text("thresholds_db = -45\n")
