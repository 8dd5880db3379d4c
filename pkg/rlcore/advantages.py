from dataclasses import replace

import numpy as np

from ndmath.exceptions import ShapeError

ADVANTAGE_STD_FLOOR = 1e-8


def compute_gae(rewards, values, bootstrap_value, gamma, lam, dones=None, next_values=None):
    """
    Generalized Advantage Estimation обратной рекурсией:
        delta_t = r_t + gamma * V(s_{t+1}) - V(s_t)
        A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    Цели ценности V_targ = A + V.

    next_values задаёт V(s_{t+1}) для каждого шага (на границе эпизода по
    лимиту времени это V(s_T)). Если он не задан, используется сдвиг values
    с bootstrap_value в конце.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    size = rewards.shape[0]
    if values.shape != rewards.shape:
        raise ShapeError("compute-gae", rewards.shape, values.shape)
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma должен лежать в [0, 1), получено {gamma}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda должна лежать в [0, 1], получено {lam}")

    if next_values is None:
        next_values = np.append(values[1:], float(bootstrap_value))
    next_values = np.asarray(next_values, dtype=np.float64)
    if next_values.shape != rewards.shape:
        raise ShapeError("compute-gae", rewards.shape, next_values.shape)
    dones = np.zeros(size) if dones is None else np.asarray(dones, dtype=np.float64)
    if dones.shape != rewards.shape:
        raise ShapeError("compute-gae", rewards.shape, dones.shape)

    deltas = rewards + gamma * next_values - values
    advantages = np.zeros(size)
    running = 0.0
    for t in range(size - 1, -1, -1):
        running = deltas[t] + gamma * lam * (1.0 - dones[t]) * running
        advantages[t] = running
    return advantages, advantages + values


def normalize_advantages(batch):
    """Среднее 0 и стандартное отклонение 1 по пакету; применяется один раз"""
    if batch.advantages_normalized:
        return batch
    centered = batch.advantages - np.mean(batch.advantages)
    if np.all(batch.advantages == batch.advantages[0]):
        # ошибка округления среднего не должна усиливаться делением на floor
        centered = np.zeros_like(centered)
    normalized = centered / max(float(np.std(centered)), ADVANTAGE_STD_FLOOR)
    return replace(batch, advantages=normalized, advantages_normalized=True)
