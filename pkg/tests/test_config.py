from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from smproof.config import ConfigError, ProofConfig, load_config, parse_config


def test_defaults_match_settings():
    cfg = ProofConfig()
    hs = cfg.homoclinic_settings()
    assert hs.R == 1e-5 and hs.L == 4e-5 and hs.T == 26.0 and hs.branch == -1
    assert hs.integrator.taylor_order == 24 and hs.integrator.tolerance == 1e-22
    ss = cfg.sep_settings()
    assert ss.rho_backward == 1.6e-4 and ss.rho_forward == 5.4e-5 and ss.T_flight is None


def test_bracket_encloses_decimals():
    cfg = ProofConfig()
    A = cfg.bracket()
    assert Fraction(float(A.lo)) <= Fraction(cfg.a_left)
    assert Fraction(float(A.hi)) >= Fraction(cfg.a_right)
    assert A.lo > 1.7243232915153 and A.hi < 1.7243232915156


def test_parse_with_comments_and_overrides():
    text = """
    # bracket far from the homoclinic value
    a_left = 1.9
    a_right = 1.9001   # inline comment
    membership_pieces = 4
    T_flight = none
    threads = 2
    """
    cfg = parse_config(text)
    assert cfg.a_left == "1.9" and cfg.membership_pieces == 4
    assert cfg.T_flight is None and cfg.threads == 2
    assert cfg.R == ProofConfig().R


@pytest.mark.parametrize("text", [
    "a_left 1.9",                     # no delimiter
    "unknown_key = 1",
    "R = fast",
    "R = -1",
    "branch = 0",
    "a_left = 1.8\na_right = 1.7",
    "a_left = one",
    "step_min = 1\nstep_max = 0.5",
    "taylor_order = 40",
    "R = none",
    "R = 1\nR = 2",
])
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config(tmp_path):
    p = tmp_path / "proof.cfg"
    p.write_text("T = 20.5\nout = results\n")
    cfg = load_config(p)
    assert cfg.T == 20.5 and cfg.out == "results"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


@given(st.floats(min_value=1e-300, max_value=1e300))
def test_float_values_roundtrip(x):
    assert parse_config(f"R = {x!r}").R == x
