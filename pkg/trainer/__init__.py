from .evaluation import evaluate, random_policy_returns
from .exceptions import (
    CheckpointCorruptError,
    CheckpointDimError,
    CheckpointError,
    CheckpointGroupError,
    CheckpointVersionError,
    DivergenceError,
)
from .mikt import MiktTrainer
from .mlpp import MlppTrainer
from .models import ALGORITHMS, Checkpoint, IterationStats, TrainConfig
from .ppo import PPOTrainer
from .serializers import load_checkpoint, save_checkpoint
from .services import make_trainer, pretrain_teacher, train_mikt, train_mlpp, train_vpg

__all__ = [
    "ALGORITHMS",
    "Checkpoint",
    "CheckpointCorruptError",
    "CheckpointDimError",
    "CheckpointError",
    "CheckpointGroupError",
    "CheckpointVersionError",
    "DivergenceError",
    "IterationStats",
    "MiktTrainer",
    "MlppTrainer",
    "PPOTrainer",
    "TrainConfig",
    "evaluate",
    "load_checkpoint",
    "make_trainer",
    "pretrain_teacher",
    "random_policy_returns",
    "save_checkpoint",
    "train_mikt",
    "train_mlpp",
    "train_vpg",
]
