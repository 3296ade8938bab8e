import pytest

from dspectrum import config
from dspectrum.config import ConfigurationError


def test_env_int_default_and_underscores(monkeypatch):
    monkeypatch.delenv("DSPECTRUM_TEST_INT", raising=False)
    assert config._env_int("DSPECTRUM_TEST_INT", 7) == 7
    monkeypatch.setenv("DSPECTRUM_TEST_INT", "  ")
    assert config._env_int("DSPECTRUM_TEST_INT", 7) == 7
    monkeypatch.setenv("DSPECTRUM_TEST_INT", "1_000")
    assert config._env_int("DSPECTRUM_TEST_INT", 7) == 1000


@pytest.mark.parametrize("raw", ["abc", "0", "-5", "1.5"])
def test_env_int_rejects_bad_values(monkeypatch, raw):
    monkeypatch.setenv("DSPECTRUM_TEST_INT", raw)
    with pytest.raises(ConfigurationError):
        config._env_int("DSPECTRUM_TEST_INT", 7)


def test_env_flag(monkeypatch):
    monkeypatch.delenv("DSPECTRUM_TEST_FLAG", raising=False)
    assert config._env_flag("DSPECTRUM_TEST_FLAG") is False
    for raw in ("1", "TRUE", " yes ", "on"):
        monkeypatch.setenv("DSPECTRUM_TEST_FLAG", raw)
        assert config._env_flag("DSPECTRUM_TEST_FLAG") is True
    monkeypatch.setenv("DSPECTRUM_TEST_FLAG", "off")
    assert config._env_flag("DSPECTRUM_TEST_FLAG") is False


def test_get_run_dir_creates_directory(monkeypatch, tmp_path):
    monkeypatch.setattr(config, "DATA_DIR", tmp_path)
    run_dir = config.get_run_dir("Construct")
    assert run_dir == tmp_path / "runs" / "construct"
    assert run_dir.is_dir()


def test_defaults_are_positive():
    assert config.MAX_PRECISION >= 64
    assert config.Q_CAP > 0
    assert config.K_BUDGET > 0
