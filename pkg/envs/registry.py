"""
Реестр сред: crawler-1 ... crawler-8, повреждённые варианты crawler-k-cpj
(j последних действий отключены) и crawler-k-rev (награда за движение назад).
"""

from .exceptions import UnknownEnvError
from .models import EnvSpec

MAX_SEGMENTS = 8


def _build_registry():
    registry = {}
    for k in range(1, MAX_SEGMENTS + 1):
        registry[f"crawler-{k}"] = EnvSpec(id=f"crawler-{k}", segments=k)
        for j in range(1, k):
            env_id = f"crawler-{k}-cp{j}"
            registry[env_id] = EnvSpec(id=env_id, segments=k, disabled=j)
        env_id = f"crawler-{k}-rev"
        registry[env_id] = EnvSpec(id=env_id, segments=k, reward_direction=-1.0)
    return registry


ENV_REGISTRY = _build_registry()


def make_env(env_id):
    try:
        return ENV_REGISTRY[env_id]
    except KeyError:
        raise UnknownEnvError(env_id, ENV_REGISTRY) from None


def list_envs():
    """Спецификации в порядке (число сегментов, идентификатор)"""
    return sorted(ENV_REGISTRY.values(), key=lambda spec: (spec.segments, spec.id))
