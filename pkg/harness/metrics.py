import logging
import time
from pathlib import Path

import pandas as pd
from scipy.integrate import trapezoid

from .models import BASE_COLUMNS, MetricsRow, metrics_columns

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
PROBES_FILE = "probes.csv"
PROBE_COLUMNS = ["iteration", "loss", "group", "norm"]
# Итоговая отдача: среднее ret_mean за последние итерации
FINAL_WINDOW = 3


class MetricsLog:
    """
    Построчная запись metrics.csv и probes.csv в каталог запуска.
    Файлы перезаписываются при создании журнала.
    """

    def __init__(self, run_dir, policy_layers, value_layers, wall_clock=True):
        self.run_dir = Path(run_dir)
        self.policy_layers = policy_layers
        self.value_layers = value_layers
        self.wall_clock = wall_clock
        self.columns = metrics_columns(policy_layers, value_layers)
        self.rows = []
        self.started = time.perf_counter()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(self.metrics_path, index=False)
        pd.DataFrame(columns=PROBE_COLUMNS).to_csv(self.probes_path, index=False)

    @property
    def metrics_path(self):
        return self.run_dir / METRICS_FILE

    @property
    def probes_path(self):
        return self.run_dir / PROBES_FILE

    def record(self, stats):
        wall_s = time.perf_counter() - self.started if self.wall_clock else 0.0
        row = MetricsRow.from_stats(stats, self.policy_layers, self.value_layers, wall_s)
        if self.rows and row.env_steps <= self.rows[-1].env_steps:
            raise ValueError(f"Счётчик шагов не растёт: {row.env_steps} после {self.rows[-1].env_steps}")
        self.rows.append(row)
        pd.DataFrame([row.values()], columns=self.columns).to_csv(
            self.metrics_path, mode="a", header=False, index=False, na_rep="nan"
        )
        probes = [
            (stats.iteration, loss, group, norm)
            for (loss, group), norm in sorted(stats.report.probes.items())
        ]
        if probes:
            pd.DataFrame(probes, columns=PROBE_COLUMNS).to_csv(
                self.probes_path, mode="a", header=False, index=False
            )
        return row


def read_metrics(path):
    """Читает metrics.csv и проверяет схему"""
    path = Path(path)
    if path.is_dir():
        path = path / METRICS_FILE
    frame = pd.read_csv(path)
    columns = list(frame.columns)
    if columns[: len(BASE_COLUMNS)] != list(BASE_COLUMNS) or columns[-1] != "wall_s":
        raise ValueError(f"{path}: схема столбцов не совпадает с metrics.csv")
    if not frame["env_steps"].is_monotonic_increasing or frame["env_steps"].duplicated().any():
        raise ValueError(f"{path}: env_steps должен строго возрастать")
    return frame


def read_probes(path):
    path = Path(path)
    if path.is_dir():
        path = path / PROBES_FILE
    return pd.read_csv(path)


def area_under_curve(frame):
    """Площадь под кривой ret_mean(env_steps), делённая на число шагов"""
    curve = frame.dropna(subset=["ret_mean"])
    if curve.empty:
        return float("nan")
    total = float(frame["env_steps"].iloc[-1])
    if len(curve) == 1:
        return float(curve["ret_mean"].iloc[0])
    return float(trapezoid(curve["ret_mean"], curve["env_steps"]) / total)


def final_return(frame, window=FINAL_WINDOW):
    return float(frame["ret_mean"].tail(window).mean())
