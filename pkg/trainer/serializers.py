"""
Формат чекпойнта: один JSON-документ

    {"format": "mikt-checkpoint", "version": 1, "env_id": ..., "dims": [ds, da],
     "architecture": {...}, "groups": {имя: [{"shape": [...], "data": "..."}]},
     "metadata": {...}}

Массивы хранятся как base64 от байтов float64 little-endian в порядке C.
"""

import base64
import binascii
import json
import logging
from pathlib import Path

import numpy as np

from envs.registry import ENV_REGISTRY

from .exceptions import (
    CheckpointCorruptError,
    CheckpointDimError,
    CheckpointGroupError,
    CheckpointVersionError,
)
from .models import CHECKPOINT_GROUPS, FORMAT_VERSION, Checkpoint

logger = logging.getLogger(__name__)

FORMAT_NAME = "mikt-checkpoint"
REQUIRED_GROUPS = ("policy", "log_std", "value")


def encode_array(array):
    array = np.ascontiguousarray(array, dtype="<f8")
    return {
        "shape": list(array.shape),
        "data": base64.b64encode(array.tobytes()).decode("ascii"),
    }


def decode_array(payload):
    try:
        raw = base64.b64decode(payload["data"], validate=True)
        shape = tuple(int(n) for n in payload["shape"])
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise CheckpointCorruptError(f"Повреждённый массив: {exc}") from None
    if len(raw) != 8 * int(np.prod(shape)):
        raise CheckpointCorruptError(f"Размер данных не соответствует форме {list(shape)}")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)


def _mlp_shapes(spec):
    sizes = [spec["input_dim"]] + [spec["hidden_units"]] * spec["hidden_layers"]
    sizes.append(spec["output_dim"])
    shapes = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        shapes.extend([(fan_in, fan_out), (fan_out,)])
    return shapes


def expected_shapes(architecture, name):
    """Формы массивов группы, выведенные из архитектуры"""
    if name == "log_std":
        return [(architecture["policy"]["output_dim"],)]
    if name == "decoder":
        spec = architecture["decoder"]
        return _mlp_shapes(spec) + [
            (spec["hidden_units"], spec["output_dim"]),
            (spec["output_dim"],),
        ]
    if name == "mixing":
        mixing = architecture["mixing"]
        return [(1,)] * (mixing["policy_layers"] + mixing["value_layers"])
    return _mlp_shapes(architecture[name])


def checkpoint_to_dict(checkpoint):
    return {
        "format": FORMAT_NAME,
        "version": checkpoint.version,
        "env_id": checkpoint.env_id,
        "dims": list(checkpoint.dims),
        "architecture": checkpoint.architecture,
        "groups": {
            name: [encode_array(array) for array in arrays]
            for name, arrays in checkpoint.groups.items()
        },
        "metadata": checkpoint.metadata,
    }


def validate_checkpoint(checkpoint):
    unknown = sorted(set(checkpoint.groups) - set(CHECKPOINT_GROUPS))
    if unknown:
        raise CheckpointGroupError(f"Неизвестные группы параметров: {', '.join(unknown)}")
    missing = [name for name in REQUIRED_GROUPS if name not in checkpoint.groups]
    if missing:
        raise CheckpointGroupError(f"Отсутствуют группы параметров: {', '.join(missing)}")

    policy = checkpoint.architecture.get("policy", {})
    value = checkpoint.architecture.get("value", {})
    dims = tuple(checkpoint.dims)
    if dims != (policy.get("input_dim"), policy.get("output_dim")) or value.get(
        "input_dim"
    ) != dims[0]:
        raise CheckpointDimError(
            f"Размерности {list(dims)} не совпадают с архитектурой "
            f"({policy.get('input_dim')}, {policy.get('output_dim')})"
        )
    env = ENV_REGISTRY.get(checkpoint.env_id)
    if env is not None and env.dims != dims:
        raise CheckpointDimError(
            f"Размерности {list(dims)} не совпадают со средой {checkpoint.env_id} {list(env.dims)}"
        )
    for name, arrays in checkpoint.groups.items():
        try:
            shapes = expected_shapes(checkpoint.architecture, name)
        except (KeyError, TypeError):
            raise CheckpointCorruptError(f"Нет описания архитектуры для группы {name!r}") from None
        actual = [tuple(np.shape(array)) for array in arrays]
        if actual != [tuple(shape) for shape in shapes]:
            raise CheckpointDimError(f"Группа {name!r}: формы {actual}, ожидались {shapes}")


def checkpoint_from_dict(payload):
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise CheckpointCorruptError("Документ не является чекпойнтом")
    if payload.get("version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"Версия формата {payload.get('version')!r} не поддерживается (ожидалась {FORMAT_VERSION})"
        )
    try:
        checkpoint = Checkpoint(
            env_id=payload["env_id"],
            dims=tuple(int(n) for n in payload["dims"]),
            architecture=payload["architecture"],
            groups={
                name: [decode_array(item) for item in arrays]
                for name, arrays in payload["groups"].items()
            },
            metadata=payload.get("metadata", {}),
            version=payload["version"],
        )
    except CheckpointCorruptError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CheckpointCorruptError(f"Неполный чекпойнт: {exc}") from None
    validate_checkpoint(checkpoint)
    return checkpoint


def save_checkpoint(checkpoint, path):
    validate_checkpoint(checkpoint)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(checkpoint_to_dict(checkpoint), indent=1), encoding="utf-8")
    logger.info(f"Чекпойнт сохранён: {path} ({checkpoint.env_id}, {checkpoint.algorithm})")
    return path


def load_checkpoint(path):
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"{path}: не удалось разобрать чекпойнт ({exc})") from None
    checkpoint = checkpoint_from_dict(payload)
    logger.info(f"Чекпойнт загружен: {path} ({checkpoint.env_id}, {checkpoint.algorithm})")
    return checkpoint
