import pytest

from flexramp import config
from flexramp.config import Tolerances, parse_overrides


def test_overrides_parse():
    tol = parse_overrides("val_rel=1e-5, max_depth=80")
    assert tol.val_rel == 1e-5 and tol.max_depth == 80
    assert tol.feas == Tolerances().feas


def test_unknown_or_malformed_override():
    with pytest.raises(ValueError):
        parse_overrides("nope=1")
    with pytest.raises(ValueError):
        parse_overrides("val_rel")


def test_environment_variable(monkeypatch):
    monkeypatch.setenv(config.ENV_VAR, "dedup_rel=1e-6")
    assert config.from_env().dedup_rel == 1e-6
    monkeypatch.delenv(config.ENV_VAR)
    assert config.from_env() == Tolerances()


def test_scaled_tolerances():
    tol = Tolerances()
    assert tol.val_tol(0.5) == tol.val_rel
    assert tol.val_tol(-2e4) == pytest.approx(2e4 * tol.val_rel)
    assert tol.slope_tol(3.0, -70.0) == pytest.approx(70.0 * tol.slope_rel)
