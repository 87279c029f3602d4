import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from opcomp.cli import run


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def only_run_dir(outdir, subcommand):
    dirs = list((Path(outdir) / subcommand).iterdir())
    assert len(dirs) == 1
    return dirs[0]


def test_scaling_constant_pass(tmp_path, capsys):
    code = run(["scaling-constant", "--k", "1", "--s", "1", "--d", "1",
                "--delta", "1", "--outdir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "3.4641" in out
    assert "PASS" in out
    run_dir = only_run_dir(tmp_path, "scaling-constant")
    assert (run_dir / "report.csv").exists()
    assert (run_dir / "summary.json").exists()
    assert (run_dir / "resolved.cfg").exists()


def test_unknown_flag_exits_64(tmp_path):
    assert run(["scaling-constant", "--nonsense", "1"]) == 64
    assert run(["no-such-command"]) == 64
    assert run([]) == 64


def test_poincare_defaults_and_outputs(tmp_path):
    code = run(["poincare-rates", "--levels", "3..5", "--outdir", str(tmp_path)])
    assert code == 0
    run_dir = only_run_dir(tmp_path, "poincare-rates")
    rows = read_csv(run_dir / "report.csv")
    assert {row["m"] for row in rows} == {"8", "16", "32"}
    assert all(row["config_hash"] == run_dir.name for row in rows)
    assert (run_dir / "report.svg").exists()
    assert (run_dir / "k1_p0.dat").exists()
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["all_passed"] is True


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("[study]\nlevels = 3..4\ntolerance = 0.2\n")
    code = run(["poincare-rates", "--config", str(cfg), "--levels", "3..5",
                "--outdir", str(tmp_path)])
    assert code == 0
    run_dir = only_run_dir(tmp_path, "poincare-rates")
    rows = read_csv(run_dir / "report.csv")
    assert {row["m"] for row in rows} == {"8", "16", "32"}   # flag wins
    resolved = (run_dir / "resolved.cfg").read_text()
    assert "levels = 3..5" in resolved
    assert "flag overrides file value" in resolved


def test_empty_config_uses_defaults(tmp_path):
    cfg = tmp_path / "empty.cfg"
    cfg.write_text("")
    code = run(["poincare-rates", "--levels", "3..5", "--config", str(cfg),
                "--outdir", str(tmp_path)])
    assert code == 0
    resolved = (only_run_dir(tmp_path, "poincare-rates") / "resolved.cfg").read_text()
    assert "pairs = 1:0,2:0,2:1" in resolved


def test_config_seed_key(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("[export]\nseed = 42\nm = 8\nfine = 64\nproblem = robin-1d\n")
    code = run(["basis-export", "--config", str(cfg), "--outdir", str(tmp_path)])
    assert code == 0
    resolved = (only_run_dir(tmp_path, "basis-export") / "resolved.cfg").read_text()
    assert "seed = 42" in resolved


def test_unknown_config_key_is_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[study]\nlevles = 3..5\n")
    code = run(["poincare-rates", "--config", str(cfg), "--outdir", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 1
    assert "levles" in err


def test_malformed_config_is_error(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("levels = 3..5\n")     # key-value line without a section
    code = run(["poincare-rates", "--config", str(cfg), "--outdir", str(tmp_path)])
    assert code == 1
    assert "config" in capsys.readouterr().err


def test_missing_config_is_error(tmp_path):
    code = run(["poincare-rates", "--config", str(tmp_path / "nope.cfg"),
                "--outdir", str(tmp_path)])
    assert code == 1


def test_reproducible_byte_identical_reports(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        assert run(["poincare-rates", "--levels", "3..5",
                    "--outdir", str(out)]) == 0
    d1 = only_run_dir(out1, "poincare-rates")
    d2 = only_run_dir(out2, "poincare-rates")
    assert d1.name == d2.name
    assert (d1 / "report.csv").read_bytes() == (d2 / "report.csv").read_bytes()
    assert (d1 / "k1_p0.dat").read_bytes() == (d2 / "k1_p0.dat").read_bytes()


def test_assertion_failure_still_writes_report(tmp_path):
    code = run(["poincare-rates", "--levels", "3..5", "--tolerance", "0.0001",
                "--outdir", str(tmp_path)])
    assert code == 2
    run_dir = only_run_dir(tmp_path, "poincare-rates")
    assert (run_dir / "report.csv").exists()
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["all_passed"] is False


def test_compress_kernel_small(tmp_path):
    code = run(["compress-kernel", "--levels", "0..3", "--grid-points", "512",
                "--fine", "128", "--schedule", "log2:2.4",
                "--outdir", str(tmp_path)])
    run_dir = only_run_dir(tmp_path, "compress-kernel")
    rows = read_csv(run_dir / "report.csv")
    assert {"schedule", "c", "level", "m", "n", "h", "radius", "E_psi",
            "E_eigen", "status", "config_hash"} <= set(rows[0])
    assert (run_dir / "report.svg").exists()
    assert (run_dir / "global.dat").exists()
    assert code in (0, 2)   # slope bands are not asserted at toy sizes


def test_compress_kernel_thread_count_invariant(tmp_path):
    args = ["compress-kernel", "--levels", "0..3", "--grid-points", "512",
            "--fine", "128", "--schedule", "log2:2.4", "--outdir", str(tmp_path)]
    run(args + ["--threads", "1"])
    run_dir = only_run_dir(tmp_path, "compress-kernel")
    first = (run_dir / "report.csv").read_bytes()
    run(args + ["--threads", "4"])   # same hash directory: threads excluded
    assert (run_dir / "report.csv").read_bytes() == first


def test_basis_export_robin(tmp_path):
    code = run(["basis-export", "--problem", "robin-1d", "--m", "8",
                "--fine", "64", "--radius", "0.3", "--outdir", str(tmp_path)])
    assert code == 0
    run_dir = only_run_dir(tmp_path, "basis-export")
    assert (run_dir / "member_p3_q0.csv").exists()
    assert (run_dir / "member_p3_q0_dofs.csv").exists()
    assert (run_dir / "member_p3_q0.svg").exists()
    assert (run_dir / "member_p3_q0_log.svg").exists()
    rows = read_csv(run_dir / "report.csv")
    assert rows[0]["localization_error"] != ""


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("OPCOMP_THREADS", "3")
    code = run(["poincare-rates", "--levels", "3..5", "--outdir", str(tmp_path)])
    assert code == 0
    resolved = (only_run_dir(tmp_path, "poincare-rates") / "resolved.cfg").read_text()
    assert "threads = 3" in resolved


def test_threads_flag_beats_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OPCOMP_THREADS", "3")
    code = run(["poincare-rates", "--levels", "3..5", "--threads", "2",
                "--outdir", str(tmp_path)])
    assert code == 0
    resolved = (only_run_dir(tmp_path, "poincare-rates") / "resolved.cfg").read_text()
    assert "threads = 2" in resolved


def test_msfem_beam_cli_quick(tmp_path):
    code = run(["msfem-beam", "--phi-degree", "1", "--levels", "3..5",
                "--fine", "256", "--load-seeds", "1001..1002",
                "--outdir", str(tmp_path)])
    assert code in (0, 2)
    run_dir = only_run_dir(tmp_path, "msfem-beam")
    rows = read_csv(run_dir / "report.csv")
    assert len(rows) == 3
    assert (run_dir / "error.dat").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "opcomp.cli", "scaling-constant", "--k", "1",
         "--s", "1", "--d", "1", "--outdir", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "3.4641" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "opcomp.cli", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 64
