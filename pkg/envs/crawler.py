"""
Динамика SegmentCrawler(k): k шарнирных сегментов с пружиной и
демпфированием, тяга корпуса пропорциональна a_i cos(theta_i).
step является чистой функцией (spec, state, action).
"""

import numpy as np

from ndmath.exceptions import ShapeError

from .exceptions import EpisodeFinishedError
from .models import EnvState

INITIAL_ANGLE = 0.1


def reset(spec, rng, zero_noise=False):
    """theta ~ U(-0.1, 0.1), omega = 0, v = 0"""
    if zero_noise:
        theta = np.zeros(spec.segments)
    else:
        theta = rng.uniform(-INITIAL_ANGLE, INITIAL_ANGLE, size=spec.segments)
    return EnvState(theta=theta, omega=np.zeros(spec.segments), velocity=0.0, counter=0)


def effective_action(spec, action):
    """Клиппирование в [-1, 1] и обнуление отключённых действий"""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (spec.action_dim,):
        raise ShapeError(f"{spec.id}-step", action.shape, [spec.action_dim])
    action = np.clip(action, -1.0, 1.0)
    if spec.disabled:
        action[spec.action_dim - spec.disabled :] = 0.0
    return action


def step(spec, state, action):
    """Один шаг: (next_state, reward, done)"""
    if state.counter >= spec.horizon:
        raise EpisodeFinishedError(
            f"{spec.id}: эпизод завершён после {spec.horizon} шагов, нужен reset"
        )
    a = effective_action(spec, action)
    dt = spec.dt
    omega = state.omega + dt * (a - spec.c_damp * state.omega - spec.c_spring * state.theta)
    theta = state.theta + dt * omega
    thrust = np.sum(a * np.cos(theta)) / spec.segments
    velocity = (1.0 - spec.c_drag * dt) * state.velocity + dt * thrust
    reward = spec.reward_direction * velocity - spec.control_cost * float(np.dot(a, a))
    counter = state.counter + 1
    next_state = EnvState(theta=theta, omega=omega, velocity=float(velocity), counter=counter)
    return next_state, float(reward), counter == spec.horizon


class CrawlerEnv:
    """Среда с собственным состоянием и потоком случайных чисел (для рабочих)"""

    def __init__(self, spec, rng):
        self.spec = spec
        self.rng = rng
        self.state = None
        self.episode_return = 0.0

    def reset(self):
        self.state = reset(self.spec, self.rng)
        self.episode_return = 0.0
        return self.state.observation()

    def step(self, action):
        if self.state is None:
            raise EpisodeFinishedError(f"{self.spec.id}: reset не вызван")
        self.state, reward, done = step(self.spec, self.state, action)
        self.episode_return += reward
        return self.state.observation(), reward, done
