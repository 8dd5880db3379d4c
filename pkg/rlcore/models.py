from dataclasses import dataclass, field, fields, replace

import numpy as np

from .advantages import compute_gae
from .exceptions import NonFiniteError

# Веса слагаемых суммарной функции потерь
DEFAULT_WEIGHTS = {"policy": 1.0, "value": 1.0, "mi": 1.0, "coupling": 1e-3, "kl": 0.5}


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Transition:
    """
    Один шаг траектории. mean и log_std - выходы политики сбора данных,
    нужны для KL-регуляризатора.
    """

    state: np.ndarray
    action: np.ndarray
    reward: float
    value: float
    log_prob: float
    done: bool
    next_value: float
    mean: np.ndarray = None
    log_std: np.ndarray = None

    def __post_init__(self):
        if not np.isfinite(self.log_prob):
            raise NonFiniteError("transition.log_prob", 0)


@dataclass(frozen=True)
class RolloutBatch:
    """
    Плоские массивы переходов с уже вычисленными преимуществами и целями
    ценности. Массивы доступны только для чтения.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    log_probs: np.ndarray
    dones: np.ndarray
    next_values: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray
    old_means: np.ndarray
    old_log_stds: np.ndarray
    policy_version: int = 0
    advantages_normalized: bool = False

    def __post_init__(self):
        size = len(self.rewards)
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, np.ndarray):
                if len(value) != size:
                    raise ValueError(
                        f"RolloutBatch.{item.name}: длина {len(value)}, ожидалась {size}"
                    )
                value.setflags(write=False)

    def __len__(self):
        return len(self.rewards)

    @classmethod
    def from_segments(cls, segments, gamma, lam, policy_version=0):
        """
        Собирает пакет из непрерывных отрезков траекторий (по одному на
        рабочий процесс). Преимущества считаются по каждому отрезку отдельно:
        рекурсия обрывается на done и в конце отрезка, где используется
        next_value последнего перехода.
        """
        columns = {name: [] for name in ("advantages", "value_targets")}
        transitions = []
        for segment in segments:
            if not segment:
                continue
            advantages, targets = compute_gae(
                [t.reward for t in segment],
                [t.value for t in segment],
                segment[-1].next_value,
                gamma,
                lam,
                dones=[t.done for t in segment],
                next_values=[t.next_value for t in segment],
            )
            columns["advantages"].append(advantages)
            columns["value_targets"].append(targets)
            transitions.extend(segment)
        if not transitions:
            raise ValueError("Пустой пакет переходов")

        def stack(name):
            return _frozen(np.stack([np.asarray(getattr(t, name)) for t in transitions]))

        action_dim = np.asarray(transitions[0].action).shape
        return cls(
            states=stack("state"),
            actions=stack("action"),
            rewards=_frozen([t.reward for t in transitions]),
            values=_frozen([t.value for t in transitions]),
            log_probs=_frozen([t.log_prob for t in transitions]),
            dones=_frozen([float(t.done) for t in transitions]),
            next_values=_frozen([t.next_value for t in transitions]),
            advantages=_frozen(np.concatenate(columns["advantages"])),
            value_targets=_frozen(np.concatenate(columns["value_targets"])),
            old_means=_frozen(
                [np.zeros(action_dim) if t.mean is None else t.mean for t in transitions]
            ),
            old_log_stds=_frozen(
                [np.zeros(action_dim) if t.log_std is None else t.log_std for t in transitions]
            ),
            policy_version=policy_version,
        )

    def take(self, indices):
        """Минибатч по индексам"""
        indices = np.asarray(indices)
        arrays = {
            item.name: _frozen(getattr(self, item.name)[indices])
            for item in fields(self)
            if isinstance(getattr(self, item.name), np.ndarray)
        }
        return replace(self, **arrays)

    def minibatches(self, size, rng):
        """Перемешанные минибатчи одной эпохи"""
        order = rng.permutation(len(self))
        for start in range(0, len(self), size):
            yield self.take(order[start : start + size])


@dataclass
class LossReport:
    """Значения слагаемых потерь, реализованные p и нормы градиентов по группам"""

    policy: float = 0.0
    value: float = 0.0
    mi: float = 0.0
    coupling: float = 0.0
    kl: float = 0.0
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    p_policy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p_value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    probes: dict = field(default_factory=dict)

    COMPONENTS = ("policy", "value", "mi", "coupling", "kl")

    @property
    def total(self):
        return float(sum(self.weights[name] * getattr(self, name) for name in self.COMPONENTS))

    def as_dict(self):
        data = {name: getattr(self, name) for name in self.COMPONENTS}
        data["total"] = self.total
        return data

    @classmethod
    def average(cls, reports):
        """Среднее по минибатчам; p берутся из последнего отчёта"""
        reports = list(reports)
        if not reports:
            return cls()
        last = reports[-1]
        probes = {}
        for report in reports:
            for key, norm in report.probes.items():
                probes.setdefault(key, []).append(norm)
        return cls(
            **{
                name: float(np.mean([getattr(r, name) for r in reports]))
                for name in cls.COMPONENTS
            },
            weights=dict(last.weights),
            p_policy=np.array(last.p_policy),
            p_value=np.array(last.p_value),
            probes={key: float(np.mean(norms)) for key, norms in probes.items()},
        )
