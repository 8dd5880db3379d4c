import logging

import numpy as np

from envs.models import RngStream
from envs.registry import make_env
from ndmath import ops
from ndmath.models import AdamConfig, Graph
from ndmath.optim import adam_step
from nets.distributions import gaussian_log_prob
from nets.models import GaussianPolicy, MlpSpec, ValueNet
from rlcore.advantages import normalize_advantages
from rlcore.exceptions import NonFiniteError
from rlcore.losses import ppo_policy_loss, ppo_value_loss
from rlcore.models import LossReport, RolloutBatch

from .exceptions import DivergenceError
from .models import IterationStats
from .networks import solo_checkpoint
from .rollout import RolloutCollector

logger = logging.getLogger(__name__)


def contribution_norm(arrays):
    if not arrays:
        return 0.0
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in arrays)))


class PPOTrainer:
    """
    Обычный PPO: политика и ценность в одной среде. Используется для
    предобучения учителя и базовой линии VPG; MIKT и MLPP его расширяют.

    Итерация: сбор steps_per_iteration переходов политикой theta_old, GAE,
    затем epochs эпох перемешанных минибатчей, по шагу Adam на группу
    после каждого минибатча.
    """

    def __init__(self, config, env_spec=None):
        self.config = config
        self.algorithm = config.algorithm
        self.env_spec = env_spec or make_env(config.env_id)
        init_stream, self.update_stream, *worker_streams = RngStream(config.seed).spawn(
            2 + config.num_envs
        )
        self.init_rng = init_stream.generator
        self.adam = AdamConfig(learning_rate=config.learning_rate)
        self.build_networks()
        self.collector = RolloutCollector(self.env_spec, worker_streams)
        self.env_steps = 0
        self.iteration = 0
        self.policy_version = 0

    def build_networks(self):
        state_dim, action_dim = self.env_spec.dims
        layers, units = self.config.hidden_layers, self.config.hidden_units
        self.policy = GaussianPolicy(MlpSpec(state_dim, action_dim, layers, units), self.init_rng)
        self.value = ValueNet(MlpSpec(state_dim, 1, layers, units), self.init_rng)

    @property
    def trainable_groups(self):
        return self.policy.groups + self.value.groups

    def rollout_outputs(self, states):
        mean, log_std = self.policy.forward(states)
        return mean.data, log_std.data, self.value.forward(states).data

    def state_values(self, states):
        return self.value.forward(states).data

    def log_probs(self, states, actions):
        """log pi(a | s) текущей политики без записи графа"""
        return gaussian_log_prob(*self.policy.forward(states), actions).data

    def collect(self):
        per_worker = self.config.steps_per_iteration // self.config.num_envs
        segments, returns = self.collector.collect(
            per_worker, self.rollout_outputs, self.state_values
        )
        batch = RolloutBatch.from_segments(
            segments, self.config.gamma, self.config.lam, policy_version=self.policy_version
        )
        self.env_steps += len(batch)
        return batch, returns

    def routes(self):
        """Какие группы получают градиент каждого слагаемого"""
        groups = [group.name for group in self.trainable_groups]
        return {"policy": groups, "value": groups}

    def loss_scales(self):
        return {"policy": 1.0, "value": 1.0}

    def loss_weights(self):
        weights = {name: 0.0 for name in LossReport.COMPONENTS}
        weights.update(self.loss_scales())
        return weights

    def loss_terms(self, minibatch, graph):
        mean, log_std = self.policy.forward(minibatch.states, graph)
        new_log_probs = gaussian_log_prob(mean, log_std, minibatch.actions)
        return {
            "policy": ppo_policy_loss(minibatch, new_log_probs, self.config.clip_epsilon),
            "value": ppo_value_loss(minibatch, self.value.forward(minibatch.states, graph)),
        }

    def mixing_values(self):
        return np.zeros(0), np.zeros(0)

    def update_minibatch(self, minibatch, losses=None):
        """
        Все обратные проходы минибатча, затем по шагу Adam на каждую группу.
        losses ограничивает набор включённых слагаемых (проверка маршрутизации).
        """
        graph = Graph()
        try:
            terms = self.loss_terms(minibatch, graph)
        except NonFiniteError as exc:
            logger.error(f"Итерация {self.iteration}: {exc}")
            raise DivergenceError(str(exc)) from exc
        for name, term in terms.items():
            if not np.isfinite(term.item()):
                logger.error(f"Итерация {self.iteration}: потеря {name} = {term.item()}")
                raise DivergenceError(f"Нечисловое значение потери {name} на итерации {self.iteration}")

        routes, scales = self.routes(), self.loss_scales()
        probes = {}
        for name, term in terms.items():
            enabled = name in routes and (losses is None or name in losses)
            contributions = {}
            if enabled:
                scaled = ops.scalar_affine(term, scales.get(name, 1.0))
                contributions = graph.backward(scaled, groups=routes[name])
            for group in self.trainable_groups:
                probes[(name, group.name)] = contribution_norm(contributions.get(group.name))
        for group in self.trainable_groups:
            adam_step(group, self.adam)

        p_policy, p_value = self.mixing_values()
        report = LossReport(
            **{name: term.item() for name, term in terms.items()},
            weights=self.loss_weights(),
            p_policy=p_policy,
            p_value=p_value,
            probes=probes,
        )
        logger.debug(
            "Минибатч: " + ", ".join(f"{k}={v:.5g}" for k, v in report.as_dict().items())
        )
        return report

    def update(self, batch):
        batch = normalize_advantages(batch)
        reports = []
        for _ in range(self.config.epochs):
            for minibatch in batch.minibatches(self.config.minibatch_size, self.update_stream):
                reports.append(self.update_minibatch(minibatch))
        self.policy_version += 1
        return LossReport.average(reports)

    def iteration_stats(self, returns, report):
        return IterationStats(self.iteration, self.env_steps, list(returns), report)

    def train_iteration(self):
        self.iteration += 1
        batch, returns = self.collect()
        stats = self.iteration_stats(returns, self.update(batch))
        logger.info(
            f"[{self.algorithm}] итерация {stats.iteration}: шагов {stats.env_steps}, "
            f"отдача {stats.return_mean:.3f} ± {stats.return_std:.3f}, "
            f"L_pi={stats.report.policy:.4f}, L_v={stats.report.value:.4f}"
        )
        return stats

    def run(self, callback=None):
        """Полный цикл обучения; callback(stats) после каждой итерации"""
        logger.info(
            f"[{self.algorithm}] старт: среда {self.env_spec.id}, "
            f"{self.config.iterations} итераций по {self.config.steps_per_iteration} шагов, "
            f"seed {self.config.seed}"
        )
        for _ in range(self.config.iterations):
            stats = self.train_iteration()
            if callback is not None:
                callback(stats)
        logger.info(f"[{self.algorithm}] обучение завершено: {self.env_steps} шагов")
        return self.checkpoint()

    def metadata(self):
        return {
            "algorithm": self.algorithm,
            "env_steps": self.env_steps,
            "iterations": self.iteration,
            "seed": self.config.seed,
            "config_hash": self.config.config_hash(),
        }

    def checkpoint(self):
        return solo_checkpoint(self.env_spec, self.policy, self.value, self.metadata())
