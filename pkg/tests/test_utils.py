import configparser

import pytest
from pydantic import ValidationError

from heisenberg_psido.exceptions import ConfigurationException
from heisenberg_psido.utils import load_run_config, parse_symbol, parse_tolerance, save_calibration


def test_parse_symbol_with_params():
    assert parse_symbol("XY-T:m=4,m0=2,variant=Y") == ("XY-T", {"m": 4, "m0": 2, "variant": "Y"})


def test_parse_symbol_without_params():
    assert parse_symbol("I-L") == ("I-L", {})


def test_parse_symbol_float_param():
    assert parse_symbol("f1-f2L:s1=0.5") == ("f1-f2L", {"s1": 0.5})


def test_parse_symbol_rejects_bare_item():
    with pytest.raises(ConfigurationException):
        parse_symbol("XY-T:m")


def test_parse_tolerance():
    assert parse_tolerance("tail=0.05") == ("tail", 0.05)
    with pytest.raises(ConfigurationException):
        parse_tolerance("tail")


@pytest.fixture
def ini(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[grid]\nn = 1\npoints = 128\n\n"
        "[lambda]\nlam_min = 0.125\nlam_max = 8\n\n"
        "[symbol]\nname = XY-T\nm = 2\nm0 = 2\n\n"
        "[experiment]\nname = desk\norders = 2,1,0\nseed = 3\n\n"
        "[tolerances]\ntail = 0.05\n"
    )
    return path


def test_load_run_config(ini):
    cfg = load_run_config(ini)
    assert cfg.grid.points == 128
    assert cfg.lam.lam_max == 8
    assert cfg.symbol.name == "XY-T"
    assert cfg.symbol.params == {"m": 2, "m0": 2}
    assert cfg.experiment.orders == (2, 1, 0)
    assert cfg.resolved_tolerances()["tail"] == 0.05
    assert cfg.resolved_tolerances()["identity"] == 1e-5


def test_overrides_win(ini):
    cfg = load_run_config(ini, {"experiment": {"seed": 11}, "tolerances": {"tail": 0.2}})
    assert cfg.experiment.seed == 11
    assert cfg.experiment.name == "desk"
    assert cfg.tolerances["tail"] == 0.2


def test_defaults_without_file():
    cfg = load_run_config()
    assert cfg.symbol.name == "I-L"
    assert cfg.calibration.c_n is None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationException):
        load_run_config(tmp_path / "absent.ini")


def test_unknown_tolerance_is_rejected():
    with pytest.raises(ValidationError):
        load_run_config(overrides={"tolerances": {"bogus": 1.0}})


def test_bad_band_is_rejected():
    with pytest.raises(ValidationError):
        load_run_config(overrides={"lam": {"lam_min": 2.0, "lam_max": 1.0}})


def test_save_calibration_keeps_other_sections(ini):
    save_calibration(ini, 0.025, None)
    save_calibration(ini, 0.026, 0.4)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read(ini)
    assert parser.get("symbol", "name") == "XY-T"
    assert float(parser.get("calibration", "c_n")) == 0.026
    assert float(parser.get("calibration", "c_n_prime")) == 0.4
    cfg = load_run_config(ini)
    assert cfg.calibration.c_n == 0.026
