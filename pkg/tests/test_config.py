"""
Tests for settings loading and precedence.
"""

import pytest

from app.exceptions import ConfigError
from app.services.config_service import Settings, config_service, parse_budgets


@pytest.mark.unit
class TestConfigService:
    """Test configuration loading."""

    def test_defaults(self):
        """Test the documented defaults."""
        settings = config_service.load()
        assert settings.seed == 2024
        assert settings.level == 1
        assert settings.budgets == (2, 3, 2)
        assert settings.host_port == ("127.0.0.1", 7878)

    def test_explicit_values(self):
        """Test command line values land in the settings."""
        settings = config_service.load(seed=7, level=2, addr="0.0.0.0:9000")
        assert (settings.seed, settings.level, settings.host_port) == (7, 2, ("0.0.0.0", 9000))

    def test_environment_wins_over_flags(self, monkeypatch):
        """Test TRAPTP_SEED overrides --seed."""
        monkeypatch.setenv("TRAPTP_SEED", "99")
        assert config_service.load(seed=7).seed == 99

    def test_none_overrides_are_ignored(self):
        """Test unset flags fall back to the default."""
        assert config_service.load(seed=None).seed == 2024

    @pytest.mark.parametrize(
        "overrides",
        [{"seed": -1}, {"level": 3}, {"addr": "localhost"}, {"addr": "host:70000"}, {"log_level": "LOUD"}, {"budget_t": 9}],
    )
    def test_invalid_values(self, overrides):
        """Test values outside their ranges."""
        with pytest.raises(ConfigError):
            config_service.load(**overrides)

    def test_get_setting_caches_until_reload(self, monkeypatch):
        """Test cached lookups and reload."""
        config_service.load(seed=5)
        assert config_service.get_setting("seed") == 5
        monkeypatch.setenv("TRAPTP_SEED", "6")
        assert config_service.get_setting("seed") == 5
        config_service.reload()
        assert config_service.get_setting("seed") == 6

    def test_log_level_normalized(self):
        """Test lower-case levels are accepted."""
        assert Settings(log_level="debug").log_level == "DEBUG"


@pytest.mark.unit
class TestParseBudgets:
    """Test the t,p,h triple."""

    def test_valid(self):
        """Test a well-formed triple."""
        assert parse_budgets("1, 0,3") == {"budget_t": 1, "budget_p": 0, "budget_h": 3}

    @pytest.mark.parametrize("text", ["1,2", "a,b,c", "1,2,3,4", "-1,0,0", ""])
    def test_invalid(self, text):
        """Test malformed triples."""
        with pytest.raises(ConfigError):
            parse_budgets(text)
