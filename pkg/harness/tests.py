import tempfile
from dataclasses import replace
from pathlib import Path
from unittest import TestCase

import numpy as np
import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from nets.models import MixingWeights
from rlcore.models import LossReport
from trainer.models import IterationStats

from .cli import cli, main
from .configs import echo_config, load_config
from .exceptions import ConfigError, UnknownRecipeError
from .metrics import MetricsLog, area_under_curve, final_return, read_metrics, read_probes
from .models import ExperimentConfig, ExperimentRecipe, MetricsRow, RecipeRun, metrics_columns
from .recipes import get_recipe, recipe_configs, run_recipe, summarize
from .runner import run_experiment

TINY = dict(
    total_steps=256,
    steps_per_iteration=128,
    epochs=1,
    minibatch_size=32,
    hidden_units=8,
    encoder_units=8,
    eval_episodes=1,
    wall_clock=False,
)


def tiny_config(**overrides):
    return ExperimentConfig(**dict(TINY, **overrides))


class TempDirMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_yaml(self, name, payload):
        path = self.root / name
        path.write_text(payload if isinstance(payload, str) else yaml.safe_dump(payload), encoding="utf-8")
        return path


class LoadConfigTests(TempDirMixin, TestCase):
    """Тесты загрузки конфигурации"""

    def test_empty_file_defaults(self):
        """Пустой файл: значения по умолчанию"""
        config = load_config(self.write_yaml("empty.yaml", ""))
        self.assertEqual((config.gamma, config.lam, config.clip_epsilon), (0.99, 0.95, 0.2))
        self.assertEqual((config.learning_rate, config.epochs, config.minibatch_size), (3e-4, 10, 64))
        self.assertEqual(config.eval_episodes, 5)

    def test_precedence(self):
        """Командная строка важнее файла, файл важнее значений по умолчанию"""
        path = self.write_yaml("run.yaml", {"gamma": 0.9, "epochs": 3})
        config = load_config(path, {"gamma": 0.95, "seed": None})
        self.assertEqual(config.gamma, 0.95)
        self.assertEqual(config.epochs, 3)
        self.assertEqual(config.seed, 0)

    def test_unknown_key(self):
        """Опечатка в имени параметра отклоняется с подсказкой"""
        with self.assertRaisesRegex(ConfigError, "gama.*gamma"):
            load_config(self.write_yaml("typo.yaml", {"gama": 0.9}))
        with self.assertRaises(ConfigError):
            load_config(None, {"learning_rat": 0.1})

    def test_type_mismatch(self):
        """Значение не того типа"""
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("bad.yaml", {"epochs": "ten"}))
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("bad.yaml", {"epochs": True}))
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("bad.yaml", {"use_mi": 1}))

    def test_int_for_float(self):
        """Целое значение допустимо для вещественного параметра"""
        config = load_config(self.write_yaml("int.yaml", {"c_kl": 1}))
        self.assertIsInstance(config.c_kl, float)

    def test_invalid_values(self):
        """Не отображение и недопустимые значения"""
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("list.yaml", "- 1\n- 2\n"))
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("gamma.yaml", {"gamma": 1.5}))
        with self.assertRaises(ConfigError):
            load_config(self.write_yaml("broken.yaml", "gamma: [0.9"))

    def test_echo_round_trip(self):
        """Записанная конфигурация читается обратно без изменений"""
        config = tiny_config(algorithm="vpg", learning_rate=1e-3, use_kl_reg=False, label="x")
        self.assertEqual(load_config(echo_config(config, self.root / "config.yaml")), config)


class MetricsTests(TempDirMixin, TestCase):
    """Тесты журнала метрик"""

    def stats(self, iteration, returns, p_policy=(), p_value=()):
        report = LossReport(
            policy=0.1, value=0.2, p_policy=np.array(p_policy), p_value=np.array(p_value),
            probes={("policy", "policy"): 0.5, ("value", "value"): 0.25},
        )
        return IterationStats(iteration, 100 * iteration, returns, report)

    def test_column_order(self):
        """Фиксированный порядок столбцов"""
        self.assertEqual(
            metrics_columns(2, 2),
            [
                "iteration", "env_steps", "ret_mean", "ret_std", "loss_pi", "loss_v", "loss_mi",
                "loss_couple", "loss_kl", "p_pi_mean", "p_v_mean", "p_pi_1", "p_pi_2",
                "p_v_1", "p_v_2", "wall_s",
            ],
        )

    def test_solo_row_zero_mixing(self):
        """Для алгоритмов без учителя столбцы p нулевые"""
        row = MetricsRow.from_stats(self.stats(1, [1.0]), 2, 2)
        self.assertEqual(row.p_pi, [0.0, 0.0])
        self.assertEqual((row.p_pi_mean, row.p_v_mean, row.loss_mi), (0.0, 0.0, 0.0))
        self.assertEqual(len(row.values()), len(metrics_columns(2, 2)))

    def test_write_and_read(self):
        """Строки пишутся по итерациям; итерация без эпизодов даёт nan"""
        log = MetricsLog(self.root, 2, 2, wall_clock=False)
        log.record(self.stats(1, [], [0.5, 0.6], [0.5, 0.5]))
        log.record(self.stats(2, [2.0, 4.0], [0.55, 0.65], [0.5, 0.6]))
        frame = read_metrics(self.root)
        self.assertEqual(list(frame.columns), metrics_columns(2, 2))
        self.assertTrue(np.isnan(frame["ret_mean"].iloc[0]))
        self.assertEqual(frame["ret_mean"].iloc[1], 3.0)
        self.assertAlmostEqual(frame["p_pi_mean"].iloc[1], 0.6)
        self.assertEqual(frame["wall_s"].tolist(), [0.0, 0.0])
        probes = read_probes(self.root)
        self.assertEqual(len(probes), 4)

    def test_steps_must_increase(self):
        """Повтор счётчика шагов отклоняется"""
        log = MetricsLog(self.root, 1, 1)
        log.record(self.stats(1, [1.0]))
        with self.assertRaises(ValueError):
            log.record(self.stats(1, [1.0]))

    def test_curve_statistics(self):
        """Площадь под кривой и итоговая отдача"""
        frame = pd.DataFrame({"env_steps": [100, 200, 300, 400], "ret_mean": [1.0, 3.0, 3.0, 5.0]})
        self.assertAlmostEqual(area_under_curve(frame), (200.0 + 300.0 + 400.0) / 400.0)
        self.assertEqual(final_return(frame), (3.0 + 3.0 + 5.0) / 3)
        frame.loc[0, "ret_mean"] = np.nan
        self.assertAlmostEqual(area_under_curve(frame), (300.0 + 400.0) / 400.0)


class RunExperimentTests(TempDirMixin, TestCase):
    """Тесты одиночного запуска"""

    def test_outputs(self):
        """Каталог запуска: конфигурация, метрики, пробы и чекпойнт"""
        result = run_experiment(tiny_config(algorithm="vpg", target_env="crawler-2"), run_dir=self.root / "vpg")
        for name in ("config.yaml", "metrics.csv", "probes.csv", "final.ckpt"):
            self.assertTrue((result.run_dir / name).is_file(), name)
        frame = read_metrics(result.run_dir)
        self.assertEqual(frame["iteration"].tolist(), [1, 2])
        self.assertEqual(frame["env_steps"].tolist(), [128, 256])
        self.assertEqual(frame["loss_mi"].tolist(), [0.0, 0.0])
        self.assertEqual(result.eval_std, 0.0)

    def test_echo_reproduces_run(self):
        """Запуск по записанной конфигурации даёт побайтно тот же metrics.csv"""
        first = run_experiment(tiny_config(algorithm="vpg", seed=3), run_dir=self.root / "a")
        config = load_config(first.run_dir / "config.yaml")
        second = run_experiment(config, run_dir=self.root / "b")
        self.assertEqual(
            (first.run_dir / "metrics.csv").read_bytes(), (second.run_dir / "metrics.csv").read_bytes()
        )

    def test_teacher_required(self):
        """MIKT без учителя и с отсутствующим файлом учителя"""
        with self.assertRaises(ValueError):
            run_experiment(tiny_config(algorithm="mikt"), run_dir=self.root / "m")
        with self.assertRaises(FileNotFoundError):
            run_experiment(
                tiny_config(algorithm="mikt", teacher=str(self.root / "missing.ckpt")), run_dir=self.root / "m"
            )

    def test_mikt_ablation_probes(self):
        """use_mi = False: столбец L_MI есть, проба MI на энкодер нулевая"""
        teacher = run_experiment(
            tiny_config(algorithm="pretrain", source_env="crawler-2"), run_dir=self.root / "teacher"
        )
        config = tiny_config(
            algorithm="mikt", target_env="crawler-3", use_mi=False,
            teacher=str(teacher.run_dir / "final.ckpt"),
        )
        result = run_experiment(config, run_dir=self.root / "mikt")
        frame = read_metrics(result.run_dir)
        self.assertTrue((frame["loss_mi"] > 0).all())
        self.assertTrue(((frame["p_pi_mean"] > 0) & (frame["p_pi_mean"] < 1)).all())
        probes = read_probes(result.run_dir)
        mi_encoder = probes[(probes["loss"] == "mi") & (probes["group"] == "encoder")]
        self.assertEqual(len(mi_encoder), 2)
        self.assertTrue((mi_encoder["norm"] == 0.0).all())
        decoder = probes[(probes["loss"] == "mi") & (probes["group"] == "decoder")]
        self.assertTrue((decoder["norm"] > 0.0).all())


class RecipeTests(TempDirMixin, TestCase):
    """Тесты рецептов"""

    def test_transfer_matrix_cardinality(self):
        """Строка на алгоритм, пару и seed; учитель на исходную среду и seed"""
        teachers, runs = recipe_configs(get_recipe("transfer-matrix"), self.root)
        self.assertEqual(len(runs), 3 * 4 * 5)
        self.assertEqual(len(teachers), 2 * 5)
        combos = {(c.algorithm, c.source_env, c.target_env, c.seed) for c, _ in runs}
        self.assertEqual(len(combos), 60)
        self.assertTrue(all(c.teacher for c, _ in runs if c.algorithm != "vpg"))

    def test_kl_ablation_two_configs(self):
        """Две конфигурации, отличающиеся только use_kl_reg"""
        recipe = replace(get_recipe("kl-ablation"), seeds=(0,))
        _, runs = recipe_configs(recipe, self.root)
        self.assertEqual(len(runs), 2)
        first, second = (config.to_dict() for config, _ in runs)
        differing = {key for key in first if first[key] != second[key]}
        self.assertEqual(differing, {"use_kl_reg", "label", "output_dir"})

    def test_unknown_recipe(self):
        with self.assertRaises(UnknownRecipeError):
            get_recipe("transfer")

    def test_seeds_required(self):
        """Пустой список seed-ов недопустим"""
        with self.assertRaises(ValueError):
            ExperimentRecipe("x", "", [RecipeRun("vpg", "vpg", "crawler-2", "crawler-4")], seeds=())

    def test_run_and_summarize(self):
        """Маленький рецепт: сводка пересчитывается из CSV без скрытого состояния"""
        recipe = ExperimentRecipe(
            "tiny",
            "",
            [RecipeRun("mikt", "mikt", "crawler-1", "crawler-2"), RecipeRun("vpg", "vpg", "crawler-1", "crawler-2")],
            seeds=(0, 1),
            total_steps=256,
            teacher_steps=256,
        )
        summary = run_recipe(recipe, self.root, tiny_config(), n_jobs=1)
        self.assertEqual(len(summary), 4)
        self.assertEqual(sorted(summary["label"].unique()), ["mikt", "vpg"])
        self.assertTrue((self.root / "summary.csv").is_file())
        self.assertTrue((self.root / "teachers" / "crawler-1-s0" / "final.ckpt").is_file())
        recomputed = summarize(summary["run_dir"])
        pd.testing.assert_frame_equal(recomputed, summary)
        vpg = summary[summary["label"] == "vpg"]
        self.assertTrue((vpg["p_pi_last"] == 0.0).all())


class CliTests(TempDirMixin, TestCase):
    """Тесты командной строки"""

    def invoke(self, *args):
        return CliRunner().invoke(cli, ["--log-level", "ERROR", *args])

    def tiny_args(self, out):
        return [
            "--steps", "256", "--steps-per-iteration", "128", "--epochs", "1", "--minibatch", "32",
            "--hidden-units", "8", "--eval-episodes", "1", "--no-wall-clock", "--out", str(self.root / out),
        ]

    def test_list_envs(self):
        """Реестр с размерностями"""
        result = self.invoke("list-envs")
        self.assertEqual(result.exit_code, 0)
        self.assertIn("crawler-2: 5/2", result.output)
        self.assertIn("crawler-4: 9/4", result.output)
        self.assertIn("crawler-4-cp1: 9/4", result.output)

    def test_list_recipes(self):
        result = self.invoke("list-recipes")
        self.assertEqual(result.exit_code, 0)
        for name in ("transfer-matrix", "ablations", "kl-ablation", "dissimilar-teacher"):
            self.assertIn(name, result.output)

    def test_errors(self):
        """Разные ошибки дают разные сообщения и ненулевой код"""
        unknown_env = self.invoke("train", "--algo", "vpg", "--env", "crawler-9", *self.tiny_args("x"))
        self.assertEqual(unknown_env.exit_code, 1)
        self.assertIn("crawler-9", unknown_env.output)

        missing_teacher = self.invoke("train", "--algo", "mikt", "--teacher", str(self.root / "t.ckpt"))
        self.assertEqual(missing_teacher.exit_code, 2)
        self.assertIn("t.ckpt", missing_teacher.output)

        no_teacher = self.invoke("train", "--algo", "mikt", *self.tiny_args("y"))
        self.assertEqual(no_teacher.exit_code, 1)
        self.assertIn("учитель", no_teacher.output)

        bad_flag = self.invoke("train", "--algo", "sac")
        self.assertEqual(bad_flag.exit_code, 2)

        config = self.write_yaml("typo.yaml", {"gama": 0.9})
        typo = self.invoke("train", "--config", str(config))
        self.assertEqual(typo.exit_code, 1)
        self.assertIn("gama", typo.output)

    def test_pretrain_train_eval(self):
        """Учитель, MIKT без L_MI и оценка чекпойнта"""
        result = self.invoke("pretrain", "--env", "crawler-2", *self.tiny_args("teacher"))
        self.assertEqual(result.exit_code, 0, result.output)
        teacher = self.root / "teacher" / "final.ckpt"
        self.assertTrue(teacher.is_file())

        result = self.invoke(
            "train", "--algo", "mikt", "--teacher", str(teacher), "--source-env", "crawler-2",
            "--env", "crawler-4", "--no-mi", "--encoder-units", "8", *self.tiny_args("mikt"),
        )
        self.assertEqual(result.exit_code, 0, result.output)
        run_dir = self.root / "mikt"
        self.assertIn("loss_mi", read_metrics(run_dir).columns)
        probes = read_probes(run_dir)
        self.assertTrue((probes[(probes["loss"] == "mi") & (probes["group"] == "encoder")]["norm"] == 0).all())
        self.assertFalse(load_config(run_dir / "config.yaml").use_mi)

        result = self.invoke("eval", str(run_dir / "final.ckpt"), "--episodes", "1", "--random")
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("crawler-4", result.output)

        result = self.invoke("eval", str(run_dir / "final.ckpt"), "--env", "crawler-2")
        self.assertEqual(result.exit_code, 1)

    def test_main_exit_codes(self):
        """main возвращает код завершения"""
        self.assertEqual(main(["--log-level", "ERROR", "list-envs"]), 0)
        self.assertEqual(main(["train", "--bogus"]), 2)
        self.assertEqual(main(["eval", str(self.root / "none.ckpt")]), 2)


@pytest.mark.slow
class TransferEfficacyTests(TempDirMixin, TestCase):
    """Направленные проверки переноса на настольном масштабе"""

    # p = sigmoid(0) до первой итерации
    INITIAL_P = float(MixingWeights(1, 1).realized()[0][0])

    def by_label(self, summary, label):
        return summary[summary["label"] == label].set_index("seed")

    def assert_beats_vpg(self, mikt, vpg, min_seeds):
        self.assertGreaterEqual(int((mikt["auc"] > vpg["auc"]).sum()), min_seeds)
        self.assertGreaterEqual(mikt["final_return"].mean(), vpg["final_return"].mean())

    def test_mikt_beats_baselines(self):
        """crawler-2 -> crawler-4: AUC MIKT выше VPG минимум в 4 из 5 seed-ов, бюджеты равны"""
        runs = [
            RecipeRun(algorithm, algorithm, "crawler-2", "crawler-4") for algorithm in ("mikt", "vpg", "mlpp")
        ]
        summary = run_recipe(ExperimentRecipe("efficacy", "", runs), self.root, ExperimentConfig(wall_clock=False))
        mikt, vpg, mlpp = (self.by_label(summary, label) for label in ("mikt", "vpg", "mlpp"))
        self.assert_beats_vpg(mikt, vpg, 4)
        self.assertGreaterEqual(mikt["auc"].mean(), mlpp["auc"].mean())
        self.assertTrue(np.isfinite(mlpp["auc"]).all())
        budgets = {int(read_metrics(run_dir)["env_steps"].iloc[-1]) for run_dir in summary["run_dir"]}
        self.assertEqual(len(budgets), 1)
        self.assertTrue((mikt["p_pi_last"] > self.INITIAL_P).all())
        self.assertTrue((mikt["p_v_last"] > self.INITIAL_P).all())

    def test_ablation_ordering(self):
        """AUC полного MIKT не ниже среднего AUC каждой абляции"""
        summary = run_recipe(get_recipe("ablations"), self.root, ExperimentConfig(wall_clock=False))
        full = self.by_label(summary, "mikt")["auc"].mean()
        for label in ("mikt-no-mi", "mikt-no-rl-grad"):
            self.assertGreaterEqual(full, self.by_label(summary, label)["auc"].mean(), label)

    def test_without_kl_still_beats_vpg(self):
        """MIKT без KL-регуляризации выигрывает у VPG минимум в 3 из 5 seed-ов"""
        recipe = get_recipe("kl-ablation")
        recipe = replace(recipe, runs=list(recipe.runs) + [RecipeRun("vpg", "vpg", "crawler-2", "crawler-4")])
        summary = run_recipe(recipe, self.root, ExperimentConfig(wall_clock=False))
        self.assert_beats_vpg(self.by_label(summary, "mikt-no-kl"), self.by_label(summary, "vpg"), 3)

    def test_dissimilar_teacher_raises_mixing_faster(self):
        """Учитель с обратной наградой: p на ранних итерациях выше, чем с похожим учителем"""
        recipe = replace(get_recipe("dissimilar-teacher"), total_steps=50_000)
        summary = run_recipe(recipe, self.root, ExperimentConfig(wall_clock=False))

        def early_p(label):
            frames = [read_metrics(run_dir) for run_dir in summary[summary["label"] == label]["run_dir"]]
            return np.mean([frame["p_pi_mean"].iloc[: max(1, len(frame) // 4)].mean() for frame in frames])

        self.assertGreater(early_p("mikt-dissimilar"), early_p("mikt-similar"))

    def test_strong_coupling_drift(self):
        """c_couple в 10 раз больше: средний p выше 0.9 к концу обучения"""
        teacher = run_experiment(
            ExperimentConfig(algorithm="pretrain", source_env="crawler-2", total_steps=100_000, wall_clock=False),
            run_dir=self.root / "teacher",
        )
        config = ExperimentConfig(
            algorithm="mikt", target_env="crawler-4", c_couple=1e-2,
            teacher=str(teacher.run_dir / "final.ckpt"), wall_clock=False,
        )
        frame = read_metrics(run_experiment(config, run_dir=self.root / "mikt").run_dir)
        self.assertGreater(frame["p_pi_mean"].iloc[-1], 0.9)
        self.assertGreater(frame["p_v_mean"].iloc[-1], 0.9)
