"""
Tests for the logging configuration.
"""
from pwinterp.log_config import build_log_config, default_log_dir


class TestLogConfig:
    """Test dictConfig construction"""

    def test_file_handler_in_log_dir(self, tmp_path):
        """Test the file handler location and console level."""
        config = build_log_config("WARNING", tmp_path)
        assert config["handlers"]["application_file"]["filename"] == str(tmp_path / "pwinterp.log")
        assert config["handlers"]["console"]["level"] == "WARNING"
        assert config["loggers"]["pwinterp"]["propagate"] is False

    def test_log_dir_from_environment(self, tmp_path, monkeypatch):
        """Test PWINTERP_LOG_DIR."""
        monkeypatch.setenv("PWINTERP_LOG_DIR", str(tmp_path))
        assert default_log_dir() == tmp_path.resolve()
