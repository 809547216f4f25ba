from __future__ import annotations

from pathlib import Path

import pytest
from pydantic import ValidationError

from app.core.settings import Settings, get_settings


def test_defaults() -> None:
    settings = get_settings()

    assert settings.seed == 0
    assert settings.train_dtype == "float32"
    assert settings.metrics_textfile is None
    assert not settings.is_development


def test_environment_overrides(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("SOCCER_SEED", "42")
    monkeypatch.setenv("SOCCER_TRAIN_DTYPE", "float64")
    monkeypatch.setenv("APP_ENV", "Development")

    settings = Settings()

    assert settings.seed == 42
    assert settings.train_dtype == "float64"
    assert settings.is_development


def test_dotenv_file_is_read(tmp_path: Path) -> None:
    (tmp_path / ".env").write_text("SOCCER_DATA_DIR=/srv/soccer\n")

    assert Settings().data_dir == "/srv/soccer"


@pytest.mark.parametrize(("name", "value"), [("SOCCER_SEED", "-1"), ("SOCCER_TRAIN_DTYPE", "int8")])
def test_invalid_values_are_refused(monkeypatch: pytest.MonkeyPatch, name: str, value: str) -> None:
    monkeypatch.setenv(name, value)

    with pytest.raises(ValidationError):
        Settings()


def test_settings_are_cached() -> None:
    assert get_settings() is get_settings()
