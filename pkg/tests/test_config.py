import pytest

from billiard_security.core.config import Settings, settings


def test_defaults():
    fresh = Settings()
    assert fresh.TOLERANCE_PROFILE == "default"
    assert fresh.gp_tolerance == pytest.approx(fresh.GP_TOLERANCE)
    assert fresh.certificate_residual == pytest.approx(fresh.CERTIFICATE_RESIDUAL)


def test_strict_profile():
    strict = Settings(TOLERANCE_PROFILE="strict", GP_TOLERANCE=1e-4, CERTIFICATE_RESIDUAL=1e-8)
    assert strict.gp_tolerance == pytest.approx(1e-5)
    assert strict.certificate_residual == pytest.approx(1e-10)


def test_environment_override(monkeypatch):
    monkeypatch.setenv("BILLIARD_GP_TOLERANCE", "2e-3")
    monkeypatch.setenv("BILLIARD_TOLERANCE_PROFILE", "loose")
    configured = Settings()
    assert configured.GP_TOLERANCE == pytest.approx(2e-3)
    assert configured.gp_tolerance == pytest.approx(2e-2)


def test_unknown_profile():
    settings.TOLERANCE_PROFILE = "reckless"
    with pytest.raises(ValueError):
        settings.gp_tolerance


def test_positive_tolerances_enforced():
    with pytest.raises(ValueError):
        Settings(GRAZING_TOLERANCE=0.0)
