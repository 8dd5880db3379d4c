import difflib
import logging
from dataclasses import fields
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .models import ExperimentConfig

logger = logging.getLogger(__name__)


def field_types():
    return {item.name: item.type for item in fields(ExperimentConfig)}


def coerce(name, value, expected):
    """
    Проверяет тип значения параметра. int допустим там, где ожидается
    float; bool не считается числом.
    """
    if expected is bool:
        if isinstance(value, bool):
            return value
    elif expected is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif expected is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif expected is str:
        if isinstance(value, str):
            return value
    raise ConfigError(
        f"Параметр {name!r}: ожидался тип {expected.__name__}, получено {value!r}"
    )


def check_keys(values, origin):
    known = field_types()
    for key in values:
        if key not in known:
            hint = difflib.get_close_matches(key, known, n=1)
            suffix = f" (может быть, {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{origin}: неизвестный параметр {key!r}{suffix}")


def read_config_file(path):
    """Плоское YAML-отображение имён параметров в значения; пустой файл допустим"""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: не удалось разобрать YAML ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: ожидалось отображение параметров, получено {type(data).__name__}")
    return data


def load_config(path=None, overrides=None):
    """
    Итоговая конфигурация запуска. Приоритет: значения по умолчанию,
    затем файл, затем переопределения командной строки (None пропускается).
    """
    types = field_types()
    values = {}
    sources = []
    if path is not None:
        sources.append((str(path), read_config_file(path)))
    if overrides:
        sources.append(("командная строка", {k: v for k, v in overrides.items() if v is not None}))
    for origin, layer in sources:
        check_keys(layer, origin)
        for key, value in layer.items():
            values[key] = coerce(key, value, types[key])
    try:
        config = ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    logger.debug(f"Конфигурация: {config.to_dict()}")
    return config


def echo_config(config, path):
    """Записывает итоговую конфигурацию; файл читается обратно load_config"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=False, allow_unicode=True), encoding="utf-8")
    return path
