import os

import pytest

from ptmarket import (
    SimulationConfig,
    ValidationError,
    config_from_dict,
    dump_config,
    load_config,
)

DEFAULT = os.path.join(os.path.dirname(__file__), "..", "configs", "default.yaml")


def test_default_file():
    assert load_config(DEFAULT) == SimulationConfig()


def test_defaults():
    config = SimulationConfig()
    assert config.debate_params.pop_size == 20
    assert config.debate_params.g_max == 10_000
    assert config.pqr_params.epsilon_decay == 0.965
    assert config.price_grid.size == 61
    assert config.profile_ranges.ref_price == (0.06, 0.10)
    assert config.synth_params.production_base == 16


def test_ranges_become_tuples():
    config = config_from_dict({"losses": [0.01, 0], "k_range": [2, 3]})
    assert config.losses == (0.01, 0.0)
    assert config.k_range == (2.0, 3.0)


def test_int_for_float():
    config = config_from_dict({"rho_gs": 1})
    assert config.rho_gs == 1.0
    assert isinstance(config.rho_gs, float)


@pytest.mark.parametrize(
    "d, match",
    [
        ({"foo": 1, "bar": 2}, "bar, foo"),
        ({"horizon": "10"}, "horizon"),
        ({"horizon": 1.5}, "horizon"),
        ({"horizon": True}, "horizon"),
        ({"alpha": "fast"}, "alpha"),
        ({"alpha": False}, "alpha"),
        ({"strategy": "auction"}, "auction"),
        ({"losses": 0.01}, "list"),
        ({"losses": []}, "loss"),
        ({"k_range": [2.6, 2.1]}, "k_range"),
        ({"zeta_plus_range": [0.5, 1.2]}, "zeta_plus_range"),
        ({"seller_price_range": [0.05, 0.1]}, "seller_price_range"),
        ({"delta": 0.007}, "divide"),
        ({"horizon": 0}, "Horizon"),
        ({"pop_size": 2}, "Population"),
    ],
)
def test_validation(d, match):
    with pytest.raises(ValidationError, match=match):
        config_from_dict(d)


def test_not_a_mapping():
    with pytest.raises(ValidationError):
        config_from_dict([1, 2])


def test_load_errors(tmp_path):
    with pytest.raises(OSError):
        load_config(str(tmp_path / "missing.yaml"))
    path = tmp_path / "bad.yaml"
    path.write_text("horizon: [1, 2\n")
    with pytest.raises(ValidationError):
        load_config(str(path))


def test_load_empty(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(str(path)) == SimulationConfig()


def test_dump_load(tmp_path):
    config = SimulationConfig(horizon=10, strategy="rule", losses=(0.01, 0.05))
    path = str(tmp_path / "config.yaml")
    dump_config(config, path)
    assert load_config(path) == config
    assert config_from_dict(config.to_dict()) == config


def test_override():
    config = SimulationConfig()
    assert config.override(seed=None, strategy=None) == config
    changed = config.override(seed=3, strategy="rule")
    assert changed.seed == 3
    assert changed.strategy == "rule"
    with pytest.raises(ValidationError):
        config.override(strategy="auction")
