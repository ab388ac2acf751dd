import pytest

from motioninpaint.config import FIELDS, ConfigError, RunConfig, parse_config_text


def test_defaults_round_trip_through_text():
    cfg = RunConfig()
    assert RunConfig.from_values(parse_config_text(cfg.to_text())) == cfg


def test_parse_with_comments_and_types():
    text = "# run\nlambda3 = 2.5  # stronger transport\n\nlevels=3\nflow_iterations = 7\ntransport = none\n"
    cfg = RunConfig.from_values(parse_config_text(text))
    assert cfg.energy.lambda3 == 2.5 and cfg.pyramid.levels == 3 and cfg.flow.iterations == 7
    assert cfg.energy.transport is None


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="lambda9"):
        parse_config_text("lambda9 = 1\n")
    with pytest.raises(ConfigError, match="lambda9"):
        RunConfig.from_values({"lambda9": 1})


def test_bad_values():
    with pytest.raises(ConfigError, match="levels"):
        RunConfig.from_values({"levels": "two"})
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("lambda1 2\n")
    with pytest.raises(ConfigError):
        RunConfig.from_values({"e3_variant": "7"})


def test_every_field_is_listed_once():
    keys = [k for k, _ in RunConfig().items()]
    assert keys == list(FIELDS) and len(set(keys)) == len(keys)
