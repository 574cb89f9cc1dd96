import csv
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thzgdd.cli import DEFAULTS, PRESETS, ConfigError, ScenarioConfig, main, parse_config_text, resolve_config


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_metric_prints_value(capsys):
    assert main(["metric", "--band", "9e9", "--gdd-ps2", "2533"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("143.2 ps") and out.count("\n") == 1


def test_unknown_flag_and_key_are_usage_errors(capsys):
    assert main(["metric", "--bogus", "1"]) == 2
    assert main(["metric", "--set", "atmosphere.nope=1"]) == 2
    assert main(["nosuchcommand"]) == 2
    assert main([]) == 2
    err = capsys.readouterr().err
    assert "usage" in err


def test_bad_value_is_usage_error(capsys):
    assert main(["metric", "--rh", "wet"]) == 2


def test_domain_errors_carry_category(capsys):
    assert main(["link", "--fmin", "379", "--fmax", "381"]) == 1
    assert "error: coverage:" in capsys.readouterr().err
    assert main(["link", "--fmin", "370", "--fmax", "390", "--eq", "mlse", "--max-bits", "4096"]) == 1
    assert "error: complexity:" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["metric", "--config", str(tmp_path / "none.cfg")]) == 2


def test_atmosphere_csv(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["atmosphere", "--t-c", "29", "--rh", "0.45", "--fmin", "100", "--fmax", "600",
                 "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["freq_GHz", "atten_dB_per_m", "group_delay_ps_per_m", "gdd_ps2_per_m"]
    data = np.array(rows[1:], float)
    f, att = data[:, 0], data[:, 1]
    peaks = f[1:-1][(att[1:-1] > att[:-2]) & (att[1:-1] > att[2:])]
    for centre in (118.75, 183.31, 325.15, 380.20, 448.0, 556.94):
        assert np.min(np.abs(peaks - centre)) < 0.1


def test_gdd_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gdd", "--components", "multipath", "--path", "0:1:0", "--path", "50.5:1:0",
                 "--fmin", "100", "--fmax", "200", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["freq_GHz", "amp_dB", "phase_rad", "group_delay_ps", "gdd_ps2"]
    assert len(rows) == 10002


def test_sweep_fig5_schema(tmp_path, capsys):
    out = tmp_path / "r.csv"
    # a short frame budget keeps this quick; schema does not depend on it
    assert main(["sweep", "--preset", "fig5_pdc", "--eq", "dfe:7", "--pdc", "on", "--max-bits", "16384",
                 "--ebn0-min", "12", "--ebn0-max", "12", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["ebn0_db", "ber", "bits", "errors", "eq", "taps", "pdc", "channel_label", "fingerprint"]
    assert rows[1][4:7] == ["dfe:7", "7", "on"]
    assert "sweep:" in capsys.readouterr().out


def test_link_constellation_and_seed(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["link", "--fmin", "370", "--fmax", "390", "--ebn0", "10", "--max-bits", "4096"]
    assert main(args + ["--seed", "5", "--out", str(a)]) == 0
    assert main(args + ["--seed", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert _rows(a)[0] == ["re", "im", "tx_symbol_index"]


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_preset_expands_fully(preset):
    cfg = resolve_config(preset)
    assert set(cfg.values) == set(DEFAULTS)
    assert cfg.preset == preset


@pytest.mark.slow
@pytest.mark.parametrize("preset,command", [("fig2_pulse", "pulse-demo"), ("fig3_atmosphere", "atmosphere"),
                                            ("fig4_qpsk380", "sweep"), ("fig5_pdc", "sweep")])
def test_preset_runs_without_flags(preset, command, tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main([command, "--preset", preset, "--out", str(out)]) == 0
    assert len(_rows(out)) > 1
    assert capsys.readouterr().out.strip()


def test_scramble_demo(capsys):
    assert main(["scramble-demo", "--scramble", "7:30000:32", "--symbol-rate", "10"]) == 0
    out = capsys.readouterr().out
    assert "infeasible" in out and "(300.0 symbols)" in out


def test_dump_config_round_trip(tmp_path, capsys):
    assert main(["sweep", "--preset", "fig4_qpsk380", "--rh", "0.3", "--set", "equalizer.eq=mmse:11",
                 "--dump-config"]) == 0
    text = capsys.readouterr().out
    values, preset = parse_config_text(text)
    cfg = resolve_config(preset, text)
    assert cfg == resolve_config("fig4_qpsk380", None, {"atmosphere.rh": 0.3, "equalizer.eq": "mmse:11"})
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert main(["sweep", "--config", str(path), "--dump-config"]) == 0
    assert capsys.readouterr().out == text


def test_precedence():
    cfg = resolve_config("fig4_qpsk380", "atmosphere.rh = 0.2\nchannel.distance_m = 7\n", {"atmosphere.rh": "0.9"})
    assert cfg["atmosphere.rh"] == 0.9 and cfg["channel.distance_m"] == 7.0
    assert cfg["link.carrier"] == 380.0
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign here\n")


def test_atomic_write_leaves_no_temp(tmp_path):
    out = tmp_path / "m.csv"
    out.write_text("old")
    assert main(["metric", "--band", "9e9", "--gdd-ps2", "2533", "--out", str(out)]) == 0
    assert _rows(out)[0] == ["band_hz", "metric_ps", "symbol_duration_ps"]
    assert os.listdir(tmp_path) == ["m.csv"]


_FLOAT_KEYS = sorted(k for k, v in DEFAULTS.items() if isinstance(v, float))


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_dump_parse_identity(data):
    keys = data.draw(st.lists(st.sampled_from(_FLOAT_KEYS), unique=True, max_size=6))
    overrides = {k: data.draw(st.floats(-1e6, 1e6, allow_nan=False)) for k in keys}
    overrides["seed"] = data.draw(st.integers(0, 2 ** 32))
    overrides["equalizer.pdc"] = data.draw(st.booleans())
    preset = data.draw(st.sampled_from([None] + sorted(PRESETS)))
    cfg = resolve_config(preset, None, overrides)
    values, p = parse_config_text(cfg.dump())
    assert p == preset
    assert ScenarioConfig(values, p) == cfg
