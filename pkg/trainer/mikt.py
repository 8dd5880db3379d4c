import logging

import numpy as np

from nets.distributions import gaussian_log_prob
from nets.models import CoupledNetworkPair, MlpSpec, VariationalDecoder
from rlcore.losses import coupling_loss, kl_regularizer, mi_loss, ppo_policy_loss, ppo_value_loss

from .models import IterationStats
from .networks import coupled_checkpoint, load_teacher
from .ppo import PPOTrainer

logger = logging.getLogger(__name__)

PPO_GROUPS = ("policy", "log_std", "value", "mixing")


class MiktTrainer(PPOTrainer):
    """
    Перенос знаний от замороженного учителя через латеральные связи.

    Маршрутизация градиентов по группам:
        theta, psi        <- L_PPO (+ c_KL L_KL)
        phi (encoder)     <- L_MI + L_PPO (флаги use_mi, rl_grads_to_encoder)
        omega (decoder)   <- L_MI
        p~ (mixing)       <- c_couple L_coupling + L_PPO
    Учитель заморожен и не получает градиента ни от одного слагаемого.
    """

    def __init__(self, config, teacher, env_spec=None):
        self.teacher = teacher
        super().__init__(config, env_spec)

    def build_networks(self):
        config = self.config
        if self.teacher.env_id != config.source_env:
            logger.warning(
                f"Учитель обучен в {self.teacher.env_id}, в конфигурации source_env={config.source_env}"
            )
        teacher_policy, teacher_value = load_teacher(self.teacher)
        state_dim, action_dim = self.env_spec.dims
        self.pair = CoupledNetworkPair.build(
            teacher_policy,
            teacher_value,
            state_dim,
            action_dim,
            self.init_rng,
            hidden_layers=config.hidden_layers,
            hidden_units=config.hidden_units,
            encoder_layers=config.encoder_layers,
            encoder_units=config.encoder_units,
        )
        source_dim = teacher_policy.spec.input_dim
        self.decoder = VariationalDecoder(
            MlpSpec(source_dim, state_dim, config.encoder_layers, config.encoder_units),
            self.init_rng,
        )
        self.policy, self.value = self.pair.policy, self.pair.value
        self.teacher_fingerprints = self.teacher_state()

    def teacher_state(self):
        return [group.fingerprint() for group in self.pair.teacher_groups]

    @property
    def trainable_groups(self):
        return self.pair.trainable_groups + [self.decoder.group]

    def rollout_outputs(self, states):
        e = self.pair.embed(states)
        mean, log_std = self.pair.policy_forward(states, e=e)
        return mean.data, log_std.data, self.pair.value_forward(states, e=e).data

    def state_values(self, states):
        return self.pair.value_forward(states).data

    def log_probs(self, states, actions):
        return gaussian_log_prob(*self.pair.policy_forward(states), actions).data

    def coupling_coefficient(self):
        """c_couple, при couple_ramp_steps > 0 линейно растёт от нуля"""
        ramp = self.config.couple_ramp_steps
        if ramp <= 0:
            return self.config.c_couple
        return self.config.c_couple * min(1.0, self.env_steps / ramp)

    def routes(self):
        config = self.config
        ppo = list(PPO_GROUPS) + (["encoder"] if config.rl_grads_to_encoder else [])
        routes = {
            "policy": ppo,
            "value": ppo,
            "mi": ["decoder"] + (["encoder"] if config.use_mi else []),
            "coupling": ["mixing"],
        }
        if config.use_kl_reg:
            routes["kl"] = ppo
        return routes

    def loss_scales(self):
        return {
            "policy": 1.0,
            "value": 1.0,
            "mi": 1.0,
            "coupling": self.coupling_coefficient(),
            "kl": self.config.c_kl if self.config.use_kl_reg else 0.0,
        }

    def loss_terms(self, minibatch, graph):
        states = minibatch.states
        e = self.pair.embed(states, graph)
        mean, log_std = self.pair.policy_forward(states, graph, e=e)
        values = self.pair.value_forward(states, graph, e=e)
        new_log_probs = gaussian_log_prob(mean, log_std, minibatch.actions)
        return {
            "policy": ppo_policy_loss(minibatch, new_log_probs, self.config.clip_epsilon),
            "value": ppo_value_loss(minibatch, values),
            "kl": kl_regularizer(minibatch.old_means, minibatch.old_log_stds, mean, log_std),
            "mi": mi_loss(self.decoder, states, e, graph),
            "coupling": coupling_loss(self.pair.mixing, graph),
        }

    def mixing_values(self):
        return self.pair.mixing.realized()

    def iteration_stats(self, returns, report):
        return IterationStats(
            self.iteration, self.env_steps, list(returns), report, self.coupling_coefficient()
        )

    def train_iteration(self):
        stats = super().train_iteration()
        logger.info(
            f"[mikt] итерация {stats.iteration}: L_MI={stats.report.mi:.4f}, "
            f"p_pi={np.round(stats.report.p_policy, 4).tolist()}, "
            f"p_v={np.round(stats.report.p_value, 4).tolist()}"
        )
        return stats

    def run(self, callback=None):
        checkpoint = super().run(callback)
        if self.teacher_state() != self.teacher_fingerprints:
            raise RuntimeError("Параметры учителя изменились во время обучения")
        self.pair.decouple()
        return checkpoint

    def metadata(self):
        metadata = super().metadata()
        metadata.update(
            source_env=self.teacher.env_id,
            source_dims=list(self.teacher.dims),
            teacher_fingerprint=self.teacher.fingerprint(),
        )
        return metadata

    def checkpoint(self):
        return coupled_checkpoint(self.env_spec, self.pair, self.decoder, self.metadata())
