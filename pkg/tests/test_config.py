"""Configuration parsing, validation, and typo safety."""

import pytest

from nls4.config import ConfigError, load_config

MINIMAL = """
[experiment]
kind = conservation
[grid]
dimension = 5
"""


def write(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_minimal_fills_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, MINIMAL))
        assert cfg.experiment == "conservation"
        assert cfg.grid.r_max == 20.0
        assert cfg.sim.dt == 1e-3
        assert cfg.sim.picard_tol == 1e-10
        assert cfg.knobs["mass_tol"] == 1e-8
        # every resolved key appears in the echo
        keys = dict(cfg.canonical_items())
        assert keys["simulation.picard_tol"] == "1e-10"
        assert "conservation.mass_tol" in keys

    def test_unknown_key_named(self, tmp_path):
        bad = MINIMAL + "\n[simulation]\nlamda = 1.0\n"
        with pytest.raises(ConfigError, match="lamda"):
            load_config(write(tmp_path, bad))

    def test_unknown_section_named(self, tmp_path):
        bad = MINIMAL + "\n[misc]\nx = 1\n"
        with pytest.raises(ConfigError, match="misc"):
            load_config(write(tmp_path, bad))

    def test_unknown_experiment_kind(self, tmp_path):
        with pytest.raises(ConfigError, match="warp"):
            load_config(write(tmp_path, "[experiment]\nkind = warp\n"))

    def test_critical_power_resolved_exactly(self, tmp_path):
        text = MINIMAL + "\n[simulation]\np = critical\n"
        cfg = load_config(write(tmp_path, text))
        assert cfg.sim.p == 9.0  # 2*5/(5-4) - 1
        assert cfg.sim.critical

    def test_numeric_critical_power_detected(self, tmp_path):
        text = MINIMAL + "\n[simulation]\np = 9.0\n"
        cfg = load_config(write(tmp_path, text))
        assert cfg.sim.critical

    def test_invalid_simulation_rejected_with_rule(self, tmp_path):
        text = MINIMAL + "\n[simulation]\ndt = 5.0\nt_end = 1.0\n"
        with pytest.raises(ConfigError, match="dt"):
            load_config(write(tmp_path, text))

    def test_potential_validation(self, tmp_path):
        text = MINIMAL + "\n[potential]\nfamily = inverse_bracket\nc = 0.01\n"
        with pytest.raises(ConfigError, match="beta"):
            load_config(write(tmp_path, text))

    def test_non_admissible_strichartz_pair_rejected(self, tmp_path):
        text = """
[experiment]
kind = strichartz
[grid]
dimension = 5
[strichartz]
pairs = 3:3
"""
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, text))

    def test_admissible_pairs_parse(self, tmp_path):
        text = """
[experiment]
kind = strichartz
[grid]
dimension = 5
[strichartz]
pairs = 18:90/41; 12:30/13
"""
        cfg = load_config(write(tmp_path, text))
        assert len(cfg.knobs["pairs"]) == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_parse_error_reported(self, tmp_path):
        with pytest.raises(ConfigError, match="parse"):
            load_config(write(tmp_path, "not an ini file at all\n"))
