import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from rlcore.models import LossReport

ALGORITHMS = ("mikt", "vpg", "mlpp", "pretrain")
FORMAT_VERSION = 1
# Имена групп, допустимые в чекпойнте
CHECKPOINT_GROUPS = ("policy", "log_std", "value", "encoder", "decoder", "mixing")


@dataclass
class TrainConfig:
    """
    Гиперпараметры обучения. Значения по умолчанию: эпохи, минибатч,
    gamma, lambda, epsilon и скорость обучения из таблицы гиперпараметров
    PPO; бюджет шагов уменьшен до настольного масштаба.
    """

    algorithm: str = "mikt"
    source_env: str = "crawler-2"
    target_env: str = "crawler-4"
    total_steps: int = 200_000
    steps_per_iteration: int = 2048
    epochs: int = 10
    minibatch_size: int = 64
    gamma: float = 0.99
    lam: float = 0.95
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    c_couple: float = 1e-3
    c_kl: float = 0.5
    couple_ramp_steps: int = 0
    use_mi: bool = True
    rl_grads_to_encoder: bool = True
    use_kl_reg: bool = True
    hidden_layers: int = 2
    hidden_units: int = 64
    encoder_layers: int = 2
    encoder_units: int = 64
    num_envs: int = 1
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"algorithm: ожидалось одно из {', '.join(ALGORITHMS)}, получено {self.algorithm!r}"
            )
        positive = (
            "total_steps", "steps_per_iteration", "epochs", "minibatch_size",
            "hidden_layers", "hidden_units", "encoder_layers", "encoder_units", "num_envs",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} должен быть >= 1")
        if self.minibatch_size > self.steps_per_iteration:
            raise ValueError("minibatch_size не может превышать steps_per_iteration")
        if self.steps_per_iteration % self.num_envs:
            raise ValueError("steps_per_iteration должен делиться на num_envs")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma должен лежать в [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam должна лежать в [0, 1]")
        if not self.clip_epsilon > 0 or not self.learning_rate > 0:
            raise ValueError("clip_epsilon и learning_rate должны быть положительными")
        if self.c_couple < 0 or self.c_kl < 0 or self.couple_ramp_steps < 0:
            raise ValueError("c_couple, c_kl и couple_ramp_steps не могут быть отрицательными")

    @property
    def env_id(self):
        """Среда, в которой идёт обучение"""
        return self.source_env if self.algorithm == "pretrain" else self.target_env

    @property
    def iterations(self):
        return -(-self.total_steps // self.steps_per_iteration)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [item.name for item in fields(cls)]

    def config_hash(self):
        payload = json.dumps(
            {name: getattr(self, name) for name in TrainConfig.field_names()}, sort_keys=True
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class Checkpoint:
    """
    Сохранённое состояние обученных сетей: идентификатор и размерности
    среды, архитектура, именованные группы параметров и метаданные.
    """

    env_id: str
    dims: tuple
    architecture: dict
    groups: dict
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    @property
    def algorithm(self):
        return self.metadata.get("algorithm", "")

    @property
    def is_coupled(self):
        return "mixing" in self.groups

    def fingerprint(self):
        digest = hashlib.sha256()
        for name in sorted(self.groups):
            for array in self.groups[name]:
                digest.update(name.encode())
                digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
        return digest.hexdigest()


@dataclass
class IterationStats:
    """Итог одной итерации: шаги, завершённые эпизоды и усреднённые потери"""

    iteration: int
    env_steps: int
    episode_returns: list
    report: LossReport
    coupling_coefficient: float = 0.0

    @property
    def return_mean(self):
        return float(np.mean(self.episode_returns)) if self.episode_returns else float("nan")

    @property
    def return_std(self):
        return float(np.std(self.episode_returns)) if self.episode_returns else float("nan")
