"""
config_test.py | mfkit
--------------------------------------------------------------------
Duration / range mini-languages, config file grammar and the
defaults < file < flags precedence of RunConfig.
"""

import sys

import numpy as np
import pytest

from mfkit.config import (MfdfaConfig, build_q_grid, build_run_config, build_scale_grid,
                          echo_config, parse_config_text, parse_duration, parse_pair)
from mfkit.errors import InputError
from mfkit.workers import THREADS_ENV, resolve_threads


def test_durations():
    assert parse_duration("90") == 90
    assert parse_duration("5m") == 300
    assert parse_duration("2h") == 7200
    assert parse_duration("1d") == 86400
    with pytest.raises(InputError):
        parse_duration("1w")


def test_q_grid_contains_endpoints_and_exact_zero():
    grid = build_q_grid("-25:25:0.2")
    assert grid.size == 251
    assert grid[0] == -25.0 and grid[-1] == 25.0
    assert np.count_nonzero(grid == 0.0) == 1
    with pytest.raises(InputError):
        build_q_grid("-1:1:0.3")


def test_scale_grid_is_log_spaced_and_unique():
    grid = build_scale_grid(10000, 16, 0, 40)
    assert grid[0] == 16 and grid[-1] == 2500
    assert np.all(np.diff(grid) > 0)
    with pytest.raises(InputError):
        build_scale_grid(40, 16, 0, 10)


def test_parse_pair_rejects_reversed_range():
    assert parse_pair("3000:270000") == (3000.0, 270000.0)
    with pytest.raises(InputError):
        parse_pair("5:1")


def test_config_text_grammar():
    values = parse_config_text("# fit settings\nfit-range = 100:1000\nq = -5:5:1\n")
    assert values == {"fit_range": "100:1000", "q": "-5:5:1"}
    with pytest.raises(InputError):
        parse_config_text("seed = 1\nseed = 2\n")
    with pytest.raises(InputError):
        parse_config_text("unknown_key = 3\n")
    with pytest.raises(InputError):
        parse_config_text("detrend_order = 9\n")


def test_precedence_defaults_file_flags():
    cfg = build_run_config("mfdfa", {"seed": "7", "q": "-5:5:1"}, {"seed": "9", "q": None})
    assert cfg.seed == 9
    assert cfg.q == "-5:5:1"
    assert cfg.scale_count == 40


def test_command_defaults_for_garch():
    cfg = build_run_config("garch")
    assert cfg.sampling_period == 86400
    assert cfg.scale == 100.0
    assert build_run_config("garch", flag_values={"sampling_period": "1h"}).sampling_period == 3600


def test_echo_reads_back_to_same_config():
    cfg = build_run_config("rolling", {"window": "10d"}, {"q_min": "-4", "normalize": "true"})
    again = build_run_config("rolling", parse_config_text(echo_config(cfg)))
    assert again == cfg
    assert echo_config(again) == echo_config(cfg)


def test_mfdfa_view_uses_presets():
    cfg = build_run_config("decompose", flag_values={"preset": "year"})
    assert cfg.mfdfa_config().fit_range == (3000, 90000)
    assert cfg.mfdfa_config(surrogate=True).fit_range == (100, 20000)
    auto = build_run_config("decompose", flag_values={"preset": "auto", "fit_range": "50:500"})
    assert auto.mfdfa_config().fit_range == (50.0, 500.0)
    assert auto.mfdfa_config(surrogate=True).fit_range is None
    assert isinstance(auto.mfdfa_config(), MfdfaConfig)


def test_invalid_values_are_input_errors():
    with pytest.raises(InputError):
        build_run_config("mfdfa", flag_values={"detrend_order": "7"})
    with pytest.raises(InputError):
        build_run_config("nonsense")


def test_thread_resolution(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads() == 1
    monkeypatch.setenv(THREADS_ENV, "4")
    assert resolve_threads() == 4
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, "lots")
    assert resolve_threads() == 1


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
