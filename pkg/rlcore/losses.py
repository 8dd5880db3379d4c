"""
Функции потерь обновления: клиппированный PPO для политики, MSE для
ценности, потеря связывания весов смешивания, вариационная потеря
взаимной информации и KL-регуляризатор. Все возвращают скалярный Tensor.
"""

import numpy as np

from ndmath import ops

from .exceptions import NonFiniteError

DEFAULT_CLIP_EPSILON = 0.2


def _first_non_finite(values):
    bad = np.flatnonzero(~np.isfinite(np.asarray(values)).reshape(-1))
    return None if bad.size == 0 else int(bad[0])


def ppo_policy_loss(batch, new_log_probs, epsilon=DEFAULT_CLIP_EPSILON):
    """-mean(min(r A, clip(r, 1 - eps, 1 + eps) A)), r = exp(log pi - log pi_old)"""
    ratio = ops.exp(ops.sub(new_log_probs, batch.log_probs))
    index = _first_non_finite(ratio.data)
    if index is not None:
        raise NonFiniteError("ppo-policy-loss: ratio", index)
    advantages = batch.advantages
    unclipped = ops.mul(ratio, advantages)
    clipped = ops.mul(ops.clip(ratio, 1.0 - epsilon, 1.0 + epsilon), advantages)
    return ops.scalar_affine(ops.mean(ops.minimum(unclipped, clipped)), -1.0)


def ppo_value_loss(batch, new_values):
    return ops.mean(ops.square(ops.sub(new_values, batch.value_targets)))


def coupling_loss(mixing, graph=None):
    """-(1/N_pi) sum log p_pi - (1/N_v) sum log p_v; ноль при всех p = 1"""
    total = None
    for weights in (mixing.policy(graph), mixing.value(graph)):
        if not weights:
            continue
        logs = ops.log(weights[0])
        for p in weights[1:]:
            logs = ops.add(logs, ops.log(p))
        term = ops.scalar_affine(ops.sum(logs), -1.0 / len(weights))
        total = term if total is None else ops.add(total, term)
    return total


def mi_loss(decoder, states, embeddings, graph=None):
    """-mean log q_omega(s | phi(s)) по минибатчу"""
    log_q = decoder.log_density(states, embeddings, graph)
    index = _first_non_finite(log_q.data)
    if index is not None:
        raise NonFiniteError("mi-loss: log q", index)
    return ops.scalar_affine(ops.mean(log_q), -1.0)


def kl_regularizer(old_mean, old_log_std, mean, log_std):
    """
    D_KL(pi_new || pi_old) для диагональных гауссиан, среднее по минибатчу:
        sum_i [log s_old - log s + (s^2 + (mu - mu_old)^2) / (2 s_old^2) - 1/2]
    Выходы старой политики являются константами.
    """
    old_mean = np.asarray(getattr(old_mean, "data", old_mean), dtype=np.float64)
    old_log_std = np.asarray(getattr(old_log_std, "data", old_log_std), dtype=np.float64)
    old_precision = np.exp(-2.0 * old_log_std)
    log_ratio = ops.sub(log_std, old_log_std)
    variance_ratio = ops.exp(ops.scalar_affine(log_ratio, 2.0))
    shift = ops.mul(ops.square(ops.sub(mean, old_mean)), old_precision)
    per_dim = ops.add(
        ops.scalar_affine(log_ratio, -1.0, -0.5),
        ops.scalar_affine(ops.add(shift, variance_ratio), 0.5),
    )
    return ops.mean(ops.sum(per_dim, axis=-1))
