from .advantages import compute_gae, normalize_advantages
from .exceptions import NonFiniteError
from .losses import coupling_loss, kl_regularizer, mi_loss, ppo_policy_loss, ppo_value_loss
from .models import DEFAULT_WEIGHTS, LossReport, RolloutBatch, Transition

__all__ = [
    "DEFAULT_WEIGHTS",
    "LossReport",
    "NonFiniteError",
    "RolloutBatch",
    "Transition",
    "compute_gae",
    "coupling_loss",
    "kl_regularizer",
    "mi_loss",
    "normalize_advantages",
    "ppo_policy_loss",
    "ppo_value_loss",
]
