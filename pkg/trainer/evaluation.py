import logging

import numpy as np

from envs.crawler import CrawlerEnv
from envs.models import RngStream

from .networks import check_env_dims, restore_coupled, restore_solo

logger = logging.getLogger(__name__)


def run_episodes(act_fn, env_spec, episodes, seed):
    """Отдачи episodes полных эпизодов; act_fn(obs, rng) -> действие"""
    if episodes < 1:
        raise ValueError("Число эпизодов должно быть >= 1")
    env = CrawlerEnv(env_spec, RngStream(seed))
    returns = []
    for _ in range(episodes):
        obs, done = env.reset(), False
        while not done:
            obs, _, done = env.step(act_fn(obs, env.rng))
        returns.append(env.episode_return)
    return np.array(returns)


def evaluate(checkpoint, env_spec, episodes=5, seed=0, teacher=None):
    """
    (среднее, стандартное отклонение) отдачи детерминированной политики
    (среднее гауссианы). Без teacher оценивается отсоединённый студент, с
    teacher чекпойнт MIKT оценивается в связке с учителем.
    """
    check_env_dims(checkpoint, env_spec)
    if teacher is not None:
        pair, _ = restore_coupled(checkpoint, teacher)

        def act(obs, rng):
            return pair.policy_forward(obs)[0].data
    else:
        policy, _ = restore_solo(checkpoint)

        def act(obs, rng):
            return policy.forward(obs)[0].data

    returns = run_episodes(act, env_spec, episodes, seed)
    mean, std = float(np.mean(returns)), float(np.std(returns))
    mode = "в связке с учителем" if teacher is not None else "сольно"
    logger.info(f"Оценка {env_spec.id} ({mode}): {mean:.3f} ± {std:.3f} за {episodes} эпизодов")
    return mean, std


def random_policy_returns(env_spec, episodes=10, seed=0):
    """Базовая линия: равномерно случайные действия в [-1, 1]^k"""

    def act(obs, rng):
        return rng.uniform(-1.0, 1.0, size=env_spec.action_dim)

    returns = run_episodes(act, env_spec, episodes, seed)
    return float(np.mean(returns)), float(np.std(returns))
