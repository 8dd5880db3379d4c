import numpy as np

from envs.crawler import CrawlerEnv
from nets.distributions import gaussian_log_prob, sample_action
from rlcore.models import Transition


class RolloutCollector:
    """
    Несколько сред, шагающих синхронно. У каждой среды свой поток случайных
    чисел (начальные состояния и шум действий); переходы складываются в
    отрезки по рабочим в фиксированном порядке. Эпизоды продолжаются между
    итерациями.
    """

    def __init__(self, env_spec, streams):
        self.env_spec = env_spec
        self.envs = [CrawlerEnv(env_spec, stream) for stream in streams]
        self.observations = [env.reset() for env in self.envs]

    def __len__(self):
        return len(self.envs)

    def collect(self, steps_per_worker, act_fn, value_fn):
        """
        act_fn(obs) -> (mean, log_std, values) для матрицы наблюдений,
        value_fn(obs) -> values. Возвращает (отрезки переходов, отдачи
        завершённых эпизодов).
        """
        segments = [[] for _ in self.envs]
        completed = []
        for _ in range(steps_per_worker):
            states = np.stack(self.observations)
            means, log_std, values = act_fn(states)
            steps = []
            for i, env in enumerate(self.envs):
                action = sample_action(means[i], log_std, env.rng)
                log_prob = gaussian_log_prob(means[i], log_std, action).item()
                next_obs, reward, done = env.step(action)
                steps.append((action, log_prob, next_obs, reward, done))
            # V(s_{t+1}); в конце эпизода это V(s_T) для бутстрэпа по лимиту времени
            next_values = value_fn(np.stack([step[2] for step in steps]))
            for i, (action, log_prob, next_obs, reward, done) in enumerate(steps):
                segments[i].append(
                    Transition(
                        state=states[i],
                        action=action,
                        reward=reward,
                        value=float(values[i]),
                        log_prob=log_prob,
                        done=done,
                        next_value=float(next_values[i]),
                        mean=means[i],
                        log_std=log_std,
                    )
                )
                if done:
                    completed.append(self.envs[i].episode_return)
                    self.observations[i] = self.envs[i].reset()
                else:
                    self.observations[i] = next_obs
        return segments, completed
