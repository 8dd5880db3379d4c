import functools
import logging
import logging.config
from dataclasses import replace
from pathlib import Path

import click

from config import settings
from envs.registry import list_envs, make_env
from trainer.evaluation import evaluate, random_policy_returns
from trainer.serializers import load_checkpoint

from .configs import load_config
from .recipes import RECIPES, get_recipe, list_recipes, recipe_description, run_recipe
from .runner import run_experiment

logger = logging.getLogger(__name__)

# Ошибки предметной области превращаются в однострочную диагностику и код 1
DOMAIN_ERRORS = (ValueError, KeyError, RuntimeError, OSError)


def configure_logging(level=None):
    logging.config.dictConfig(settings.LOGGING)
    if level:
        logging.getLogger().setLevel(level.upper())


def domain_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.ClickException:
            raise
        except DOMAIN_ERRORS as exc:
            logger.debug("Подробности ошибки", exc_info=True)
            raise click.ClickException(str(exc) or type(exc).__name__) from exc

    return wrapper


def training_options(func):
    options = [
        click.option(
            "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
            help="YAML-файл параметров (формат config.yaml каталога запуска).",
        ),
        click.option("--seed", type=int, help="Seed запуска."),
        click.option("--steps", "total_steps", type=int, help="Бюджет шагов среды."),
        click.option("--steps-per-iteration", type=int),
        click.option("--epochs", type=int),
        click.option("--minibatch", "minibatch_size", type=int),
        click.option("--gamma", type=float),
        click.option("--lam", type=float),
        click.option("--clip", "clip_epsilon", type=float),
        click.option("--lr", "learning_rate", type=float),
        click.option("--hidden-layers", type=int),
        click.option("--hidden-units", type=int),
        click.option("--num-envs", type=int, help="Число параллельных сред при сборе."),
        click.option("--eval-episodes", type=int),
        click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Каталог запуска."),
        click.option(
            "--wall-clock/--no-wall-clock", default=None,
            help="Писать время в wall_s (без него файлы метрик воспроизводимы побайтно).",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def report_run(result):
    click.echo(f"Каталог запуска: {result.run_dir}")
    click.echo(f"Оценка: {result.eval_mean:.3f} ± {result.eval_std:.3f}")


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Уровень логирования (по умолчанию MIKT_LOG_LEVEL).",
)
def cli(log_level):
    """Перенос знаний между агентами с разными пространствами состояний и действий."""
    configure_logging(log_level)


@cli.command()
@click.option("--env", "source_env", help="Исходная среда учителя.")
@training_options
@domain_errors
def pretrain(config_path, **overrides):
    """Предобучение учителя обычным PPO в исходной среде."""
    config = load_config(config_path, dict(overrides, algorithm="pretrain"))
    report_run(run_experiment(config))


@cli.command()
@click.option("--algo", "algorithm", type=click.Choice(["mikt", "vpg", "mlpp"]))
@click.option("--env", "target_env", help="Целевая среда студента.")
@click.option("--source-env", help="Исходная среда учителя.")
@click.option("--teacher", type=click.Path(exists=True, dir_okay=False), help="Чекпойнт учителя.")
@click.option("--mi/--no-mi", "use_mi", default=None, help="Обучать энкодер по L_MI.")
@click.option(
    "--rl-grad/--no-rl-grad", "rl_grads_to_encoder", default=None,
    help="Пропускать градиенты PPO в энкодер.",
)
@click.option("--kl/--no-kl", "use_kl_reg", default=None, help="KL-регуляризация политики.")
@click.option("--c-couple", type=float)
@click.option("--c-kl", type=float)
@click.option("--couple-ramp", "couple_ramp_steps", type=int, help="Шагов линейного роста c_couple.")
@click.option("--encoder-layers", type=int)
@click.option("--encoder-units", type=int)
@training_options
@domain_errors
def train(config_path, **overrides):
    """Обучение студента: mikt, vpg или mlpp."""
    config = load_config(config_path, overrides)
    if config.algorithm == "pretrain":
        raise click.UsageError("Для предобучения используйте команду pretrain")
    report_run(run_experiment(config))


@cli.command("eval")
@click.argument("checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--env", "env_id", help="Среда оценки (по умолчанию среда чекпойнта).")
@click.option("--episodes", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--teacher", type=click.Path(exists=True, dir_okay=False),
    help="Оценить чекпойнт MIKT в связке с учителем.",
)
@click.option("--random", "with_random", is_flag=True, help="Добавить базовую линию случайной политики.")
@domain_errors
def evaluate_command(checkpoint_path, env_id, episodes, seed, teacher, with_random):
    """Детерминированная оценка чекпойнта."""
    checkpoint = load_checkpoint(checkpoint_path)
    env_spec = make_env(env_id or checkpoint.env_id)
    teacher = load_checkpoint(teacher) if teacher else None
    mean, std = evaluate(checkpoint, env_spec, episodes, seed, teacher=teacher)
    click.echo(f"{env_spec.id}: {mean:.3f} ± {std:.3f} ({episodes} эпизодов)")
    if with_random:
        mean, std = random_policy_returns(env_spec, episodes, seed)
        click.echo(f"{env_spec.id} (случайная политика): {mean:.3f} ± {std:.3f}")


@cli.command()
@click.argument("name", type=click.Choice(sorted(RECIPES)))
@click.option("--out", "output_dir", type=click.Path(file_okay=False), help="Каталог рецепта.")
@click.option("--seeds", type=click.IntRange(min=1), help="Число seed-ов (0..n-1).")
@click.option("--steps", "total_steps", type=int, help="Бюджет шагов студента.")
@click.option("--teacher-steps", type=int, help="Бюджет шагов учителя.")
@click.option("--jobs", "n_jobs", type=int, help="Параллельных процессов (по умолчанию MIKT_N_JOBS).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--steps-per-iteration", type=int)
@click.option("--wall-clock/--no-wall-clock", default=None)
@domain_errors
def recipe(name, output_dir, seeds, total_steps, teacher_steps, n_jobs, config_path, **overrides):
    """Рецепт эксперимента: несколько конфигураций и seed-ов, сводка в summary.csv."""
    experiment = get_recipe(name)
    changes = {}
    if seeds:
        changes["seeds"] = tuple(range(seeds))
    if total_steps:
        changes["total_steps"] = total_steps
    if teacher_steps:
        changes["teacher_steps"] = teacher_steps
    experiment = replace(experiment, **changes)
    base = load_config(config_path, overrides)
    output_dir = Path(output_dir or settings.RUNS_DIR / name)
    summary = run_recipe(experiment, output_dir, base, n_jobs)
    click.echo(f"Сводка ({len(summary)} запусков): {output_dir / 'summary.csv'}")


@cli.command("list-envs")
def list_envs_command():
    """Реестр сред с размерностями состояния и действия."""
    for spec in list_envs():
        notes = []
        if spec.disabled:
            notes.append(f"отключено действий: {spec.disabled}")
        if spec.reward_direction < 0:
            notes.append("награда за движение назад")
        suffix = f"  ({', '.join(notes)})" if notes else ""
        click.echo(f"{spec.id}: {spec.state_dim}/{spec.action_dim}{suffix}")


@cli.command("list-recipes")
@click.option("--verbose", "-v", is_flag=True, help="Показать конфигурации рецептов.")
def list_recipes_command(verbose):
    """Доступные рецепты экспериментов."""
    for item in list_recipes():
        click.echo(f"{item.name}: {item.description} ({len(item.runs)} конфигураций × {len(item.seeds)} seed-ов)")
        if verbose:
            click.echo(recipe_description(item))


def main(argv=None):
    """Код возврата: 0 при успехе, 1 при ошибке предметной области, 2 при ошибке аргументов"""
    try:
        result = cli.main(args=argv, prog_name="manage.py", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Прервано", err=True)
        return 1
    return result if isinstance(result, int) else 0
