from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    """
    Параметры среды SegmentCrawler(k). Размерности выводятся из числа
    сегментов: состояние 2k + 1, действие k.
    """

    id: str
    segments: int
    disabled: int = 0
    reward_direction: float = 1.0
    horizon: int = 200
    dt: float = 0.05
    c_damp: float = 0.1
    c_spring: float = 0.5
    c_drag: float = 0.5
    control_cost: float = 0.01

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError(f"{self.id}: число сегментов должно быть >= 1")
        if not 0 <= self.disabled < self.segments:
            raise ValueError(f"{self.id}: отключено {self.disabled} из {self.segments} действий")

    @property
    def state_dim(self):
        return 2 * self.segments + 1

    @property
    def action_dim(self):
        return self.segments

    @property
    def dims(self):
        return self.state_dim, self.action_dim

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class EnvState:
    """Углы суставов, угловые скорости, скорость корпуса и счётчик шагов"""

    theta: np.ndarray
    omega: np.ndarray
    velocity: float
    counter: int = 0

    def observation(self):
        return np.concatenate([self.theta, self.omega, [self.velocity]])


class RngStream:
    """
    Поток случайных чисел на счётчиковом генераторе Philox.
    Одинаковые seed и последовательность запросов дают одинаковые значения.
    """

    algorithm = "philox"

    def __init__(self, seed, seed_sequence=None):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._sequence = seed_sequence or np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.Philox(self._sequence))

    def __repr__(self):
        return f"RngStream({self.algorithm}, seed={self.seed}, position={self.position})"

    @property
    def position(self):
        """Счётчик блоков Philox"""
        return int(self.generator.bit_generator.state["state"]["counter"][0])

    def spawn(self, count):
        """Независимые дочерние потоки (например, по одному на рабочего)"""
        return [RngStream(self.seed, child) for child in self._sequence.spawn(count)]

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def permutation(self, n):
        return self.generator.permutation(n)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)
