from .configs import echo_config, load_config
from .exceptions import ConfigError, UnknownRecipeError
from .metrics import MetricsLog, read_metrics
from .models import ExperimentConfig, ExperimentRecipe, MetricsRow, RecipeRun, RunResult, metrics_columns
from .recipes import RECIPES, get_recipe, run_recipe, summarize
from .runner import run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentRecipe",
    "MetricsLog",
    "MetricsRow",
    "RECIPES",
    "RecipeRun",
    "RunResult",
    "UnknownRecipeError",
    "echo_config",
    "get_recipe",
    "load_config",
    "metrics_columns",
    "read_metrics",
    "run_experiment",
    "run_recipe",
    "summarize",
]
