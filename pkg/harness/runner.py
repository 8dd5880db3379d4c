import logging
from pathlib import Path

from tqdm import tqdm

from config import settings
from trainer.evaluation import evaluate
from trainer.serializers import load_checkpoint, save_checkpoint
from trainer.services import make_trainer

from .configs import echo_config
from .metrics import MetricsLog
from .models import RunResult

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.yaml"
CHECKPOINT_FILE = "final.ckpt"


def resolve_teacher(config, teacher=None):
    """Чекпойнт учителя: переданный объект или файл из config.teacher"""
    if teacher is not None or config.algorithm not in ("mikt", "mlpp"):
        return teacher
    if not config.teacher:
        raise ValueError(f"Для {config.algorithm} нужен учитель: укажите teacher")
    path = Path(config.teacher)
    if not path.is_file():
        raise FileNotFoundError(f"Файл учителя не найден: {path}")
    return load_checkpoint(path)


def run_experiment(config, teacher=None, run_dir=None, show_progress=None):
    """
    Один запуск: config.yaml, metrics.csv, probes.csv и final.ckpt в
    каталоге запуска, затем детерминированная оценка итоговой политики.
    """
    teacher = resolve_teacher(config, teacher)
    run_dir = Path(run_dir or config.output_dir or config.default_run_dir(settings.RUNS_DIR))
    if show_progress is None:
        show_progress = settings.SHOW_PROGRESS
    echo_config(config, run_dir / CONFIG_FILE)
    logger.info(f"Запуск {config.algorithm} в {config.env_id}, seed {config.seed}: {run_dir}")

    trainer = make_trainer(config.train_config(), teacher)
    metrics = MetricsLog(
        run_dir, config.hidden_layers, config.hidden_layers, wall_clock=config.wall_clock
    )
    progress = tqdm(
        total=config.iterations,
        desc=f"{config.algorithm} {config.env_id} s{config.seed}",
        disable=not show_progress,
        leave=False,
    )

    def on_iteration(stats):
        row = metrics.record(stats)
        progress.update(1)
        progress.set_postfix(ret=f"{row.ret_mean:.2f}", p_pi=f"{row.p_pi_mean:.3f}")

    try:
        checkpoint = trainer.run(on_iteration)
    finally:
        progress.close()
    save_checkpoint(checkpoint, run_dir / CHECKPOINT_FILE)

    eval_mean, eval_std = evaluate(
        checkpoint, trainer.env_spec, config.eval_episodes, config.eval_seed
    )
    return RunResult(run_dir, checkpoint, eval_mean, eval_std)
