"""Config parsing and schema validation tests."""

import pytest

from vqht.config import (ExperimentConfig, parse_channel_spec, parse_config,
                         SCENARIO_NAMES)
from vqht.exceptions import ConfigError


def write(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


class TestChannelSpec:
    def test_bare_names(self):
        assert parse_channel_spec("identity") == ("identity", None)
        assert parse_channel_spec(" z ") == ("z", None)

    def test_parametrized(self):
        assert parse_channel_spec("phase-flip:0.3") == ("phase-flip", 0.3)
        assert parse_channel_spec("depolarizing:0.25") == \
            ("depolarizing", 0.25)
        assert parse_channel_spec("haar:5") == ("haar", 5)
        assert parse_channel_spec("haar2:12") == ("haar2", 12)

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            parse_channel_spec("amplitude-damp:0.1")

    def test_rejects_missing_parameter(self):
        with pytest.raises(ValueError):
            parse_channel_spec("phase-flip")

    def test_rejects_extra_parameter(self):
        with pytest.raises(ValueError):
            parse_channel_spec("identity:0.3")

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            parse_channel_spec("phase-flip:1.5")


class TestParseConfig:
    def test_minimal(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = diamond-estimate

[diamond-estimate]
family = phase-flip
""")
        cfg = parse_config(path)
        assert isinstance(cfg, ExperimentConfig)
        assert cfg.scenario == "diamond-estimate"
        assert cfg.seed == 0
        assert cfg.output == "out"
        assert cfg.params["p_grid"] == (0.1, 0.3, 0.5, 0.7, 0.9)
        assert cfg.params["optimizer"] == "nelder-mead"

    def test_grid_parsing(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = diamond-estimate
seed = 9
output = results/d

[diamond-estimate]
family = phase-flip
p_grid = 0.2, 0.4 0.6
max_iters = 100
""")
        cfg = parse_config(path)
        assert cfg.params["p_grid"] == (0.2, 0.4, 0.6)
        assert cfg.params["max_iters"] == 100
        assert cfg.seed == 9

    def test_missing_run_section(self, tmp_path):
        path = write(tmp_path, "[diamond-estimate]\nfamily = phase-flip\n")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_unknown_scenario(self, tmp_path):
        path = write(tmp_path, "[run]\nscenario = frobnicate\n")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = illuminate

[illuminate]
bananas = 3
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_foreign_section_rejected(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = illuminate

[multi]
k = 3
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_missing_required_key(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = diamond-estimate
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_out_of_range_grid(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = diamond-estimate

[diamond-estimate]
family = phase-flip
p_grid = 0.5, 1.3
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_illuminate_zero_eta_rejected(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = illuminate

[illuminate]
eta = 0.0
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_bad_optimizer_name(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = discriminate

[discriminate]
channel1 = z
optimizer = bfgs
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_channel_spec_in_config(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = discriminate

[discriminate]
channel1 = phase-flip:0.4
""")
        cfg = parse_config(path)
        assert cfg.params["channel0"] == ("identity", None)
        assert cfg.params["channel1"] == ("phase-flip", 0.4)

    def test_bool_parsing(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = illuminate

[illuminate]
save_probes = no
""")
        cfg = parse_config(path)
        assert cfg.params["save_probes"] is False

    def test_generalize_needs_probe(self, tmp_path):
        path = write(tmp_path, """
[run]
scenario = generalize-sweep
""")
        with pytest.raises(ConfigError):
            parse_config(path)

    def test_echo_is_json_friendly(self, tmp_path):
        import json
        path = write(tmp_path, """
[run]
scenario = oracle
seed = 4
""")
        cfg = parse_config(path)
        blob = json.dumps(cfg.echo())
        assert "tmsv-reference" in blob

    def test_all_scenarios_have_schemas(self):
        from vqht.config import SCHEMAS
        for name in SCENARIO_NAMES:
            assert name in SCHEMAS
