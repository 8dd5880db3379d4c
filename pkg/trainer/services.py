from .mikt import MiktTrainer
from .mlpp import MlppTrainer
from .ppo import PPOTrainer


def make_trainer(config, teacher=None):
    """Тренер по config.algorithm; mikt и mlpp требуют чекпойнт учителя"""
    if config.algorithm in ("mikt", "mlpp") and teacher is None:
        raise ValueError(f"Для {config.algorithm} нужен чекпойнт учителя")
    if config.algorithm == "mikt":
        return MiktTrainer(config, teacher)
    if config.algorithm == "mlpp":
        return MlppTrainer(config, teacher)
    return PPOTrainer(config)


def _require(config, algorithm):
    if config.algorithm != algorithm:
        raise ValueError(f"Ожидался algorithm={algorithm}, получено {config.algorithm}")


def pretrain_teacher(config, callback=None):
    """Обычный PPO в исходной среде, чекпойнт с политикой и ценностью"""
    _require(config, "pretrain")
    return PPOTrainer(config).run(callback)


def train_vpg(config, callback=None):
    _require(config, "vpg")
    return PPOTrainer(config).run(callback)


def train_mikt(config, teacher, callback=None):
    _require(config, "mikt")
    return MiktTrainer(config, teacher).run(callback)


def train_mlpp(config, teacher, callback=None):
    _require(config, "mlpp")
    return MlppTrainer(config, teacher).run(callback)
