"""
cli_test.py | mfkit
--------------------------------------------------------------------
Argument handling, exit codes, config echo, deterministic outputs,
audit trail and run ledger.
"""

import json
import os
import sys

import pytest

from mfkit.cli import main
from mfkit.synthetic import gaussian_noise, price_path

MFDFA_FLAGS = ["--q", "-3:3:1", "--preset", "auto", "--scale-count", "12", "--quiet"]


@pytest.fixture
def price_file(tmp_path):
    p = price_path(gaussian_noise(6000, seed=1, scale=1e-3), start_time=1451606400)
    path = tmp_path / "prices.csv"
    with open(path, "w") as f:
        f.write("timestamp,price\n")
        for t, price in zip(p.timestamps, p.prices):
            f.write(f"{t},{price:.10f}\n")
    return str(path)


def _read(folder, name):
    with open(os.path.join(folder, name), "rb") as f:
        return f.read()


def test_unknown_command_and_flag_exit_one(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["mfdfa", "--no-such-flag", "1"]) == 1
    assert main([]) == 1
    assert "[CLI-ERROR] cli" in capsys.readouterr().err


def test_missing_input_names_ingest_stage(tmp_path, capsys):
    assert main(["returns", "--output", str(tmp_path / "out"), "--quiet"]) == 1
    assert "[CLI-ERROR] ingest" in capsys.readouterr().err


def test_bad_price_file_is_user_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n60,0\n")
    assert main(["returns", "--input", str(bad), "--output", str(tmp_path / "o"), "--quiet"]) == 1
    assert "not positive" in capsys.readouterr().err


def test_returns_writes_echo_and_table(price_file, tmp_path):
    out = str(tmp_path / "returns")
    assert main(["returns", "--input", price_file, "--output", out, "--dt", "5m", "--quiet"]) == 0
    echo = _read(out, "config.echo").decode()
    assert "sampling_period = 300\n" in echo
    lines = _read(out, "returns.csv").decode().splitlines()
    assert lines[0].startswith("# label=")
    assert sum(1 for line in lines if not line.startswith("#")) == 1 + (6001 // 5 - 1)


def test_config_file_then_flags(price_file, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 7\nbins = 21\n")
    out = str(tmp_path / "dist")
    code = main(["distribution", "--input", price_file, "--output", out, "--config", str(cfg),
                 "--seed", "9", "--quiet"])
    assert code == 0
    echo = _read(out, "config.echo").decode()
    assert "seed = 9\n" in echo and "bins = 21\n" in echo
    assert len(_read(out, "distribution.csv").decode().splitlines()) == 22


def test_mfdfa_outputs_are_byte_identical(price_file, tmp_path):
    out = str(tmp_path / "mf")
    args = ["mfdfa", "--input", price_file, "--output", out] + MFDFA_FLAGS
    assert main(args) == 0
    first = {name: _read(out, name) for name in sorted(os.listdir(out))}
    assert {"config.echo", "spectrum.csv", "fluctuation.csv", "summary.txt"} <= set(first)
    assert main(args + ["--threads", "2"]) == 0
    for name in ("spectrum.csv", "fluctuation.csv", "summary.txt"):
        assert _read(out, name) == first[name]


def test_decompose_report(price_file, tmp_path):
    out = str(tmp_path / "dec")
    assert main(["decompose", "--input", price_file, "--output", out, "--seed", "42"]
                + MFDFA_FLAGS) == 0
    summary = _read(out, "summary.txt").decode()
    for row in ("h(2)", "delta-h corr", "delta-h shuf", "delta-h surr", "R"):
        assert row in summary
    assert os.path.exists(os.path.join(out, "spectrum_phase.csv"))


def test_surrogate_files_record_seed(price_file, tmp_path):
    out = str(tmp_path / "sur")
    assert main(["surrogate", "--input", price_file, "--output", out, "--seed", "5",
                 "--kind", "shuffle", "--count", "2", "--quiet"]) == 0
    for i in range(2):
        text = _read(out, f"surrogate_shuffle_{i}.csv").decode()
        assert "# seed=" in text


def test_garch_table(tmp_path):
    daily = price_path(gaussian_noise(300, seed=2, scale=0.02), base_period=86400)
    path = tmp_path / "daily.csv"
    path.write_text("".join(f"{t},{p:.12f}\n" for t, p in zip(daily.timestamps, daily.prices)))
    out = str(tmp_path / "garch")
    assert main(["garch", "--input", str(path), "--base-period", "1d", "--output", out,
                 "--model", "gjr", "--burn-in", "200", "--draws", "400", "--quiet"]) == 0
    summary = _read(out, "summary.txt").decode()
    assert "gjr_delta" in summary and "AIC" in summary and "DIC" in summary
    assert "scale = 100.0\n" in _read(out, "config.echo").decode()


def test_garch_without_draws_is_user_error(tmp_path, capsys):
    daily = price_path(gaussian_noise(300, seed=2, scale=0.02), base_period=86400)
    path = tmp_path / "daily.csv"
    path.write_text("".join(f"{t},{p:.12f}\n" for t, p in zip(daily.timestamps, daily.prices)))
    assert main(["garch", "--input", str(path), "--base-period", "1d", "--output",
                 str(tmp_path / "g"), "--draws", "0", "--quiet"]) == 1
    assert "draws >= 1" in capsys.readouterr().err


def test_audit_log_and_ledger(price_file, tmp_path, capsys):
    out = str(tmp_path / "acf")
    audit = tmp_path / "logs" / "audit.jsonl"
    ledger = tmp_path / "runs.db"
    assert main(["acf", "--input", price_file, "--output", out, "--max-lag", "20",
                 "--lag-range", "1:10", "--audit-log", str(audit), "--ledger", str(ledger)]) == 0
    events = [json.loads(line) for line in audit.read_text().splitlines()]
    assert any(e["event"] == "INGEST" for e in events)
    assert not os.path.exists(os.path.join(out, "runs.db"))
    capsys.readouterr()
    assert main(["history", "--ledger", str(ledger)]) == 0
    assert "acf" in capsys.readouterr().out


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
