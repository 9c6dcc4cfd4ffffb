import pytest
from hypothesis import given, settings, strategies as st

from qphase.config import SCHEMA, ConfigError, Scenario, parse_config


def _issues(text):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return exc.value.issues


def test_minimal_config_fills_defaults():
    cfg = parse_config("run.scenario = free_wave\n")
    assert cfg.scenario is Scenario.FREE_WAVE
    assert cfg["physics.hbar"] == 1.0 and cfg["physics.m"] == 1.0
    assert (cfg["grid.n_q"], cfg["grid.n_p"]) == (256, 256)
    assert (cfg["grid.q_min"], cfg["grid.q_max"], cfg["grid.p_min"], cfg["grid.p_max"]) == (-10, 10, -5, 5)


def test_comments_and_blank_lines():
    cfg = parse_config("# header\n\nrun.scenario = quantize  # trailing\n  run.n_max = 3\n")
    assert cfg["run.n_max"] == 3
    assert cfg.lines["run.n_max"] == 4


def test_negative_dt_reports_line():
    issues = _issues("run.scenario = free_wave\ntime.dt = -0.1\n")
    assert [i.line for i in issues] == [2]
    assert "time.dt" in issues[0].message


def test_duplicate_key_names_both_lines():
    issues = _issues("run.scenario = free_wave\ntime.dt = 0.1\n\ntime.dt = 0.2\n")
    assert issues[0].line == 4
    assert "line 2" in issues[0].message


def test_all_errors_reported_together():
    text = "run.scenario = warp\ngrid.n_q = 2\nphysics.colour = red\nnot a line\ngrid.q_min = 1e\n"
    issues = _issues(text)
    assert sorted(i.line for i in issues) == [1, 2, 3, 4, 5]


def test_missing_scenario():
    issues = _issues("time.dt = 0.1\n")
    assert any("run.scenario" in i.message for i in issues)


@pytest.mark.parametrize("value", ["1.5", "-2", "3e-4", "+.5", "7.", "1E+3"])
def test_decimal_float_forms(value):
    cfg = parse_config(f"run.scenario = free_wave\nphysics.p0 = {value}\n")
    assert cfg["physics.p0"] == float(value)


@pytest.mark.parametrize("value", ["nan", "inf", "0x10", "1,5", "one"])
def test_rejected_float_forms(value):
    issues = _issues(f"run.scenario = free_wave\nphysics.p0 = {value}\n")
    assert issues[0].line == 2


def test_cross_checks():
    issues = _issues("run.scenario = free_packet\ngrid.q_min = 5\ngrid.q_max = 1\n"
                     "physics.sigma_q = 0.1\nphysics.sigma_p = 0.1\n")
    msgs = " ".join(i.message for i in issues)
    assert "grid.q_max must exceed grid.q_min" in msgs
    assert "hbar/2" in msgs
    assert _issues("run.scenario = two_slit\nphysics.p0 = 0\n")[0].line == 2
    assert _issues("run.scenario = harmonic_stationary\nrun.branch = sine\n")
    assert _issues("run.scenario = free_wave\ntime.dt = 2\ntime.t_final = 1\n")


def test_echo_is_sorted_and_complete():
    cfg = parse_config("run.scenario = quantize\n")
    echo = cfg.echo()
    assert echo == sorted(echo)
    assert len(echo) == len(SCHEMA)
    assert "physics.beta = default" in echo


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e6, allow_nan=False), st.integers(4, 4096))
def test_round_trip_numbers(dt, n):
    cfg = parse_config(f"run.scenario = free_wave\ntime.dt = {dt!r}\ngrid.n_q = {n}\ntime.t_final = 1e7\n")
    assert cfg["time.dt"] == dt and cfg["grid.n_q"] == n


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=200))
def test_parser_never_crashes(text):
    try:
        parse_config(text)
    except ConfigError as exc:
        assert exc.issues
