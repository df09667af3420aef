import pytest
import yaml

from heps_design.config import DEFAULT_CONFIG, RunConfig, config_from_dict, config_to_dict, load_config, save_config
from heps_design.errors import ConfigError


class TestDefaults:
    def test_reference_design(self):
        cfg = load_config(None)
        assert cfg.converter.V1 == 200.0
        assert cfg.converter.Lr == pytest.approx(167e-6)
        assert cfg.converter.fs == 20e3
        assert cfg.converter.t_dead == pytest.approx(400e-9)
        assert (cfg.sweep.P_min, cfg.sweep.P_max) == (100.0, 1000.0)
        assert (cfg.sweep.V2_min, cfg.sweep.V2_max) == (160.0, 240.0)
        assert cfg.sweep.n_rows == 64000
        assert cfg.train_loss.max_depth == 9 and cfg.train_loss.reg_lambda == pytest.approx(0.1)
        assert cfg.train_zvs.max_depth == 6 and cfg.train_zvs.reg_lambda == 1.0
        assert cfg.swarm.c1 == cfg.swarm.c2 == 2.05
        assert (cfg.swarm.vl_min, cfg.swarm.vl_max) == (0.4, 0.7)
        assert cfg.loss.zvs_mode == "charge"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(str(path)) == RunConfig()

    def test_default_table_matches_dataclasses(self):
        assert config_to_dict(RunConfig()) == DEFAULT_CONFIG


class TestValidation:
    def test_zero_frequency_names_field(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"converter": {"fs": 0}})
        assert excinfo.value.field == "converter.fs"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"swarm": {"particles": 4}})
        assert excinfo.value.field == "swarm.particles"

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            config_from_dict({"plotting": {}})

    def test_integer_field_rejects_fraction(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"sweep": {"n_P": 2.5}})
        assert excinfo.value.field == "sweep.n_P"

    def test_grid_must_lie_in_sweep(self):
        with pytest.raises(ConfigError) as excinfo:
            config_from_dict({"grid": {"V2_max": 260.0}})
        assert excinfo.value.field == "grid.V2_max"

    def test_zvs_mode(self):
        with pytest.raises(ConfigError):
            config_from_dict({"run": {"zvs_mode": "maybe"}})
        assert config_from_dict({"run": {"zvs_mode": "sign"}}).loss.zvs_mode == "sign"

    def test_scientific_strings(self):
        # PyYAML reads 167e-6 as a string
        cfg = config_from_dict(yaml.safe_load("converter:\n  Lr: 167e-6\n"))
        assert cfg.converter.Lr == pytest.approx(167e-6)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.yaml"))

    def test_unparsable_file(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("converter: [1, 2\n")
        with pytest.raises(ConfigError):
            load_config(str(path))


class TestRoundTrip:
    def test_save_then_load(self, tmp_path):
        cfg = config_from_dict({
            "converter": {"Lr": 150e-6},
            "swarm": {"n_particles": 7, "c_zvs": 50.0},
            "run": {"seed": 42, "zvs_mode": "sign", "n_jobs": 2},
        })
        path = tmp_path / "config.yaml"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg

    def test_seeds_are_not_configurable_per_section(self):
        assert "seed" not in DEFAULT_CONFIG["swarm"]
        assert "seed" not in DEFAULT_CONFIG["train_loss"]
