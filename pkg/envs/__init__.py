from .crawler import CrawlerEnv, effective_action, reset, step
from .exceptions import EpisodeFinishedError, UnknownEnvError
from .models import EnvSpec, EnvState, RngStream
from .registry import ENV_REGISTRY, list_envs, make_env

__all__ = [
    "CrawlerEnv",
    "ENV_REGISTRY",
    "EnvSpec",
    "EnvState",
    "EpisodeFinishedError",
    "RngStream",
    "UnknownEnvError",
    "effective_action",
    "list_envs",
    "make_env",
    "reset",
    "step",
]
