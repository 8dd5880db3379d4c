import logging
from dataclasses import replace
from pathlib import Path

import pandas as pd
import yaml
from joblib import Parallel, delayed

from config import settings

from .configs import read_config_file
from .exceptions import UnknownRecipeError
from .metrics import area_under_curve, final_return, read_metrics
from .models import ExperimentConfig, ExperimentRecipe, RecipeRun
from .runner import CHECKPOINT_FILE, CONFIG_FILE, run_experiment

logger = logging.getLogger(__name__)

TRANSFER_PAIRS = (
    ("crawler-2", "crawler-4"),
    ("crawler-2", "crawler-6"),
    ("crawler-4", "crawler-6"),
    ("crawler-2", "crawler-4-cp1"),
)
SUMMARY_FILE = "summary.csv"


def transfer_matrix():
    runs = [
        RecipeRun(algorithm, algorithm, source, target)
        for source, target in TRANSFER_PAIRS
        for algorithm in ("mikt", "vpg", "mlpp")
    ]
    return ExperimentRecipe(
        "transfer-matrix", "MIKT, VPG и MLPP на парах сред разной размерности", runs
    )


def ablations():
    runs = [
        RecipeRun("mikt", "mikt", "crawler-2", "crawler-4"),
        RecipeRun("mikt-no-mi", "mikt", "crawler-2", "crawler-4", (("use_mi", False),)),
        RecipeRun(
            "mikt-no-rl-grad", "mikt", "crawler-2", "crawler-4", (("rl_grads_to_encoder", False),)
        ),
    ]
    return ExperimentRecipe("ablations", "Вклад L_MI и градиентов RL в энкодер", runs)


def kl_ablation():
    runs = [
        RecipeRun("mikt", "mikt", "crawler-2", "crawler-4"),
        RecipeRun("mikt-no-kl", "mikt", "crawler-2", "crawler-4", (("use_kl_reg", False),)),
    ]
    return ExperimentRecipe("kl-ablation", "MIKT с KL-регуляризацией и без неё", runs)


def dissimilar_teacher():
    runs = [
        RecipeRun("mikt-similar", "mikt", "crawler-2", "crawler-4"),
        RecipeRun("mikt-dissimilar", "mikt", "crawler-2-rev", "crawler-4"),
    ]
    return ExperimentRecipe(
        "dissimilar-teacher",
        "Учитель с обратной наградой: веса смешивания растут быстрее",
        runs,
    )


RECIPES = {
    "transfer-matrix": transfer_matrix,
    "ablations": ablations,
    "kl-ablation": kl_ablation,
    "dissimilar-teacher": dissimilar_teacher,
}


def get_recipe(name):
    try:
        return RECIPES[name]()
    except KeyError:
        raise UnknownRecipeError(name, RECIPES) from None


def list_recipes():
    return [RECIPES[name]() for name in sorted(RECIPES)]


def _execute(config, run_dir):
    """Запуск в рабочем процессе joblib; возвращает только путь"""
    return str(run_experiment(config, run_dir=run_dir, show_progress=False).run_dir)


def teacher_path(output_dir, source_env, seed):
    return Path(output_dir) / "teachers" / f"{source_env}-s{seed}" / CHECKPOINT_FILE


def recipe_configs(recipe, output_dir, base=None):
    """Конфигурации учителей и основных запусков: [(config, run_dir)]"""
    base = base or ExperimentConfig()
    output_dir = Path(output_dir)
    teachers = []
    for source_env in recipe.teacher_envs:
        for seed in recipe.seeds:
            config = replace(
                base,
                algorithm="pretrain",
                source_env=source_env,
                total_steps=recipe.teacher_steps,
                seed=seed,
                teacher="",
                label="teacher",
                output_dir="",
            )
            teachers.append((config, teacher_path(output_dir, source_env, seed).parent))
    runs = []
    for run in recipe.runs:
        for seed in recipe.seeds:
            run_dir = output_dir / run.label / run.pair / f"seed-{seed}"
            teacher = str(teacher_path(output_dir, run.source_env, seed)) if run.needs_teacher else ""
            config = replace(
                base,
                algorithm=run.algorithm,
                source_env=run.source_env,
                target_env=run.target_env,
                total_steps=recipe.total_steps,
                seed=seed,
                teacher=teacher,
                label=run.label,
                output_dir=str(run_dir),
                **dict(run.overrides),
            )
            runs.append((config, run_dir))
    return teachers, runs


def run_recipe(recipe, output_dir, base=None, n_jobs=None):
    """
    Все seed-ы рецепта: сначала предобучение учителей, затем основные
    запуски. Запуски независимы и выполняются параллельно через joblib.
    Возвращает сводную таблицу, пересчитанную из CSV-файлов запусков.
    """
    n_jobs = n_jobs or settings.N_JOBS
    output_dir = Path(output_dir)
    teachers, runs = recipe_configs(recipe, output_dir, base)
    if teachers:
        logger.info(f"[{recipe.name}] предобучение {len(teachers)} учителей")
        Parallel(n_jobs=n_jobs)(delayed(_execute)(config, run_dir) for config, run_dir in teachers)
    logger.info(f"[{recipe.name}] {len(runs)} запусков, n_jobs={n_jobs}")
    run_dirs = Parallel(n_jobs=n_jobs)(delayed(_execute)(config, run_dir) for config, run_dir in runs)
    summary = summarize(run_dirs)
    summary.to_csv(output_dir / SUMMARY_FILE, index=False)
    logger.info(f"[{recipe.name}] сводка: {output_dir / SUMMARY_FILE}")
    for line in aggregate(summary).to_string().splitlines():
        logger.info(line)
    return summary


def summarize(run_dirs):
    """
    Строка на запуск: площадь под кривой обучения, итоговая отдача и
    средние веса смешивания на первой и последней итерации.
    Пересчитывается только из config.yaml и metrics.csv.
    """
    rows = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        config = read_config_file(run_dir / CONFIG_FILE)
        frame = read_metrics(run_dir)
        rows.append(
            {
                "label": config.get("label") or config["algorithm"],
                "algorithm": config["algorithm"],
                "source_env": config["source_env"],
                "target_env": config["target_env"],
                "seed": config["seed"],
                "auc": area_under_curve(frame),
                "final_return": final_return(frame),
                "p_pi_first": float(frame["p_pi_mean"].iloc[0]),
                "p_pi_last": float(frame["p_pi_mean"].iloc[-1]),
                "p_v_first": float(frame["p_v_mean"].iloc[0]),
                "p_v_last": float(frame["p_v_mean"].iloc[-1]),
                "run_dir": str(run_dir),
            }
        )
    return pd.DataFrame(rows)


def aggregate(summary):
    """Среднее и стандартное отклонение по seed-ам для каждой конфигурации и пары"""
    return (
        summary.groupby(["label", "source_env", "target_env"], sort=True)[["auc", "final_return"]]
        .agg(["mean", "std"])
    )


def recipe_description(recipe):
    runs = [
        {"label": run.label, "algorithm": run.algorithm, "pair": run.pair, "overrides": dict(run.overrides)}
        for run in recipe.runs
    ]
    return yaml.safe_dump(
        {"name": recipe.name, "description": recipe.description, "seeds": list(recipe.seeds), "runs": runs},
        sort_keys=False,
        allow_unicode=True,
    )
