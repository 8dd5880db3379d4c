import logging

from nets.exceptions import ArchitectureError
from nets.models import GaussianPolicy, MlpSpec, ValueNet

from .networks import load_teacher
from .ppo import PPOTrainer

logger = logging.getLogger(__name__)


def copy_middle_stack(teacher_mlp, student_mlp):
    """Копирует скрытые слои учителя hidden -> hidden (все, кроме входного и выходного)"""
    hidden = teacher_mlp.spec.hidden_layers
    if hidden < 2:
        raise ArchitectureError(
            f"У учителя {hidden} скрытый слой, промежуточного стека нет"
        )
    if student_mlp.spec.hidden_layers != hidden or (
        student_mlp.spec.hidden_units != teacher_mlp.spec.hidden_units
    ):
        raise ArchitectureError("Скрытые слои студента и учителя должны совпадать")
    for j in range(1, hidden):
        for target, source in zip(student_mlp.layers[j], teacher_mlp.layers[j]):
            target.value[...] = source.value


def build_mlpp_networks(teacher_policy, teacher_value, env_spec, rng):
    """Новые входной и выходной слои вокруг промежуточного стека учителя"""
    state_dim, action_dim = env_spec.dims
    spec = teacher_policy.spec
    policy = GaussianPolicy(
        MlpSpec(state_dim, action_dim, spec.hidden_layers, spec.hidden_units), rng
    )
    copy_middle_stack(teacher_policy.mean_net, policy.mean_net)
    spec = teacher_value.spec
    value = ValueNet(MlpSpec(state_dim, 1, spec.hidden_layers, spec.hidden_units), rng)
    copy_middle_stack(teacher_value.net, value.net)
    return policy, value


class MlppTrainer(PPOTrainer):
    """Дообучение промежуточного стека учителя обычным PPO; все параметры обучаются"""

    def __init__(self, config, teacher, env_spec=None):
        self.teacher = teacher
        super().__init__(config, env_spec)

    def build_networks(self):
        teacher_policy, teacher_value = load_teacher(self.teacher)
        self.policy, self.value = build_mlpp_networks(
            teacher_policy, teacher_value, self.env_spec, self.init_rng
        )
        logger.info(
            f"MLPP: промежуточный стек скопирован из учителя {self.teacher.env_id} "
            f"в сеть для {self.env_spec.id}"
        )

    def metadata(self):
        metadata = super().metadata()
        metadata.update(source_env=self.teacher.env_id, teacher_fingerprint=self.teacher.fingerprint())
        return metadata
