from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from trainer.models import TrainConfig

BASE_COLUMNS = (
    "iteration",
    "env_steps",
    "ret_mean",
    "ret_std",
    "loss_pi",
    "loss_v",
    "loss_mi",
    "loss_couple",
    "loss_kl",
    "p_pi_mean",
    "p_v_mean",
)


def metrics_columns(policy_layers, value_layers):
    """Порядок столбцов metrics.csv; число столбцов p зависит только от глубины сетей"""
    return (
        list(BASE_COLUMNS)
        + [f"p_pi_{j}" for j in range(1, policy_layers + 1)]
        + [f"p_v_{j}" for j in range(1, value_layers + 1)]
        + ["wall_s"]
    )


@dataclass
class ExperimentConfig(TrainConfig):
    """
    Конфигурация запуска: гиперпараметры обучения и параметры уровня
    запуска (каталог, путь к учителю, оценка после обучения).
    wall_clock = False пишет 0.0 в wall_s, и файлы метрик двух
    одинаковых запусков совпадают побайтно.
    """

    output_dir: str = ""
    teacher: str = ""
    label: str = ""
    eval_episodes: int = 5
    eval_seed: int = 0
    wall_clock: bool = True

    def validate(self):
        super().validate()
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes должен быть >= 1")

    def train_config(self):
        return TrainConfig(**{name: getattr(self, name) for name in TrainConfig.field_names()})

    def default_run_dir(self, runs_dir):
        return Path(runs_dir) / f"{self.algorithm}-{self.env_id}-s{self.seed}"


@dataclass
class MetricsRow:
    """Одна строка metrics.csv; неприменимые для алгоритма поля равны нулю"""

    iteration: int
    env_steps: int
    ret_mean: float
    ret_std: float
    loss_pi: float
    loss_v: float
    loss_mi: float
    loss_couple: float
    loss_kl: float
    p_pi: list = field(default_factory=list)
    p_v: list = field(default_factory=list)
    wall_s: float = 0.0

    @classmethod
    def from_stats(cls, stats, policy_layers, value_layers, wall_s=0.0):
        report = stats.report
        p_pi = [float(p) for p in report.p_policy] or [0.0] * policy_layers
        p_v = [float(p) for p in report.p_value] or [0.0] * value_layers
        return cls(
            iteration=stats.iteration,
            env_steps=stats.env_steps,
            ret_mean=stats.return_mean,
            ret_std=stats.return_std,
            loss_pi=report.policy,
            loss_v=report.value,
            loss_mi=report.mi,
            loss_couple=report.coupling,
            loss_kl=report.kl,
            p_pi=p_pi,
            p_v=p_v,
            wall_s=wall_s,
        )

    @property
    def p_pi_mean(self):
        return float(np.mean(self.p_pi)) if self.p_pi else 0.0

    @property
    def p_v_mean(self):
        return float(np.mean(self.p_v)) if self.p_v else 0.0

    def values(self):
        return [
            self.iteration,
            self.env_steps,
            self.ret_mean,
            self.ret_std,
            self.loss_pi,
            self.loss_v,
            self.loss_mi,
            self.loss_couple,
            self.loss_kl,
            self.p_pi_mean,
            self.p_v_mean,
            *self.p_pi,
            *self.p_v,
            self.wall_s,
        ]


@dataclass(frozen=True)
class RecipeRun:
    """Конфигурация внутри рецепта: алгоритм, пара сред и флаги абляции"""

    label: str
    algorithm: str
    source_env: str
    target_env: str
    overrides: tuple = ()

    @property
    def needs_teacher(self):
        return self.algorithm in ("mikt", "mlpp")

    @property
    def pair(self):
        return f"{self.source_env}-to-{self.target_env}"


@dataclass
class ExperimentRecipe:
    name: str
    description: str
    runs: list
    seeds: tuple = (0, 1, 2, 3, 4)
    total_steps: int = 200_000
    teacher_steps: int = 100_000

    def __post_init__(self):
        if not self.runs:
            raise ValueError(f"Рецепт {self.name}: список конфигураций пуст")
        if not self.seeds:
            raise ValueError(f"Рецепт {self.name}: список seed-ов пуст")

    @property
    def teacher_envs(self):
        return sorted({run.source_env for run in self.runs if run.needs_teacher})


@dataclass
class RunResult:
    run_dir: Path
    checkpoint: object
    eval_mean: float
    eval_std: float
