import numpy as np

from .exceptions import FrozenGroupError
from .models import AdamConfig


def adam_step(group, config=None):
    """
    Один шаг Adam с коррекцией смещения для группы параметров.
    После шага буферы градиентов обнуляются, счётчик шагов растёт.
    """
    if not group.trainable or group.moments is None:
        raise FrozenGroupError(f"Группа {group.name!r} заморожена, шаг Adam запрещён")
    config = config or AdamConfig()

    group.step_count += 1
    bias1 = 1.0 - config.beta1**group.step_count
    bias2 = 1.0 - config.beta2**group.step_count

    for param, (m, v) in zip(group.params, group.moments):
        g = param.grad
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        param.value -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
        g.fill(0.0)
    return group
