import math

import pytest

import cowqkd


def test_link_budget():
    assert abs(cowqkd.total_loss_db(250) - 42.6) <= 0.1


def test_entropy():
    assert cowqkd.binary_entropy(0.5) == pytest.approx(1.0)
    assert cowqkd.binary_entropy(0.0) == 0.0
    assert cowqkd.eve_info_bound(1.0) == pytest.approx(0.0)


def test_toeplitz_worked_example():
    assert cowqkd.toeplitz_hash("1011", "110", 2) == "10"
    assert cowqkd.toeplitz_hash("11", "110", 0) == ""
    with pytest.raises(ValueError):
        cowqkd.toeplitz_hash("10", "110", 2)


def test_analytic_rates_fall_with_length():
    cfg = cowqkd.Config()
    near = cowqkd.analytic_rates(cfg, 100)
    far = cowqkd.analytic_rates(cfg, 250)
    assert near["secret_rate_hz"] > far["secret_rate_hz"] > 0
    assert 0 < near["qber"] < far["qber"] < 0.05


def test_config_errors():
    with pytest.raises(cowqkd.ConfigError):
        cowqkd.Config({"fibre.no_such_key": "1"})
    cfg = cowqkd.Config({"fibre.length_km": "100"})
    assert cfg.get("fibre.length_km") == "100"
    assert len(cfg.hash()) == 16


def test_csv_outputs_are_deterministic():
    cfg = cowqkd.Config({"sweep.slots": "1000000", "sweep.lengths_km": "100,150", "run.seed": "abc"})
    a = cowqkd.sweep_csv(cfg)
    assert a == cowqkd.sweep_csv(cfg)
    lines = a.splitlines()
    assert lines[0] == cfg.provenance_line()
    assert lines[1].startswith("length_km,")
    assert len(lines) == 4


def test_align():
    cfg = cowqkd.Config({"fibre.length_km": "100", "alignment.lock_duration_s": "60"})
    csv, vmin = cowqkd.align_csv(cfg)
    assert csv.splitlines()[1].startswith("time_s,")
    assert not math.isnan(vmin)


def test_session_keys_agree():
    r = cowqkd.session(cowqkd.Config({"fibre.length_km": "100", "session.n_blocks": "1"}))
    assert not r["aborted"]
    assert r["alice_keys"] == r["bob_keys"]
    assert len(r["alice_keys"][0]) > 0
