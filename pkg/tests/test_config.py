import pytest

from app.services.config_service import ConfigService


def test_defaults(monkeypatch):
    for name in ("SRLIMITS_WORKERS", "SRLIMITS_TOLERANCE", "SRLIMITS_OUTPUT_DIR", "SRLIMITS_L_GRID"):
        monkeypatch.delenv(name, raising=False)
    config = ConfigService()
    assert config.get_workers() == 1
    assert config.get_tolerance() == 1e-10
    assert config.get_output_dir() == "reports"
    assert config.get_default_l_grid() == [1.0, 4.0, 16.0]


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("SRLIMITS_WORKERS", "4")
    monkeypatch.setenv("SRLIMITS_OUTPUT_DIR", str(tmp_path))
    monkeypatch.setenv("SRLIMITS_L_GRID", "2, 8,32")
    config = ConfigService()
    assert config.get_workers() == 4
    assert config.get_output_dir() == str(tmp_path)
    assert config.get_default_l_grid() == [2.0, 8.0, 32.0]


@pytest.mark.parametrize(
    "name, value",
    [
        ("SRLIMITS_WORKERS", "0"),
        ("SRLIMITS_WORKERS", "many"),
        ("SRLIMITS_TOLERANCE", "-1"),
        ("SRLIMITS_L_GRID", "1,x"),
        ("SRLIMITS_L_GRID", "1,0"),
    ],
)
def test_invalid_values_are_rejected(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValueError):
        ConfigService()
