import pytest

from dmdflux.config import (
    RunConfig,
    config_from_mapping,
    parse_config_text,
    serialize_config,
)
from dmdflux.errors import ConfigError

SAMPLE = """
# full sample
n = 32
scenario = combination
kappa1 = 1.5e-3
kappa2 = 3.5e-3        # query parameter
scheme = dmdfs
dt = 6.84e-3
epsilon = 1e-8
patch_size = 2
corners = 1e-3,2e-3,3e-3,4e-3
bootstrap = schur
init = interpolation
operators = ops
output_dir = out
repeats = 5
figures = false
seed = 7
"""


def test_parse_sample():
    values = parse_config_text(SAMPLE)
    cfg = config_from_mapping(values)
    assert cfg.n == 32
    assert cfg.scenario == "combination"
    assert cfg.kappa2 == 3.5e-3
    assert cfg.corners == (1e-3, 2e-3, 3e-3, 4e-3)
    assert cfg.figures is False
    assert cfg.bootstrap == "schur"


def test_round_trip_identity():
    cfg = config_from_mapping(parse_config_text(SAMPLE))
    text = serialize_config(cfg)
    cfg2 = config_from_mapping(parse_config_text(text))
    assert cfg == cfg2
    assert serialize_config(cfg2) == text


def test_defaults_round_trip():
    cfg = RunConfig()
    cfg2 = config_from_mapping(parse_config_text(serialize_config(cfg)))
    assert cfg == cfg2


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("bogus = 3")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("n = 4\nn = 8")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("n = four")


def test_missing_equals_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("just a line")


def test_validation_errors():
    with pytest.raises(ConfigError):
        RunConfig(n=7)
    with pytest.raises(ConfigError):
        RunConfig(scheme="upwind")
    with pytest.raises(ConfigError):
        RunConfig(scenario="waves")
    with pytest.raises(ConfigError):
        RunConfig(kappa1=-1.0)
    with pytest.raises(ConfigError):
        RunConfig(epsilon=2.0)
    with pytest.raises(ConfigError):
        RunConfig(corners=(2e-3, 1e-3, 3e-3, 4e-3))
    with pytest.raises(ConfigError):
        RunConfig(corners=(1e-3, 2e-3))
    with pytest.raises(ConfigError):
        RunConfig(bootstrap="coldstart")


def test_resolved_dt():
    assert RunConfig(n=64).resolved_dt == 3.37e-3
    assert RunConfig(n=64, dt=1e-3).resolved_dt == 1e-3
    with pytest.raises(ConfigError):
        RunConfig(n=20).resolved_dt


def test_corner_points_order():
    cfg = RunConfig(corners=(1e-3, 2e-3, 3e-3, 4e-3))
    assert cfg.corner_points() == [
        (1e-3, 3e-3),
        (1e-3, 4e-3),
        (2e-3, 3e-3),
        (2e-3, 4e-3),
    ]
    with pytest.raises(ConfigError):
        RunConfig().corner_points()
