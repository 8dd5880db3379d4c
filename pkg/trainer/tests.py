import json
import tempfile
from dataclasses import replace
from pathlib import Path
from unittest import TestCase

import numpy as np
import pytest

from envs.registry import make_env
from nets.exceptions import ArchitectureError
from rlcore.advantages import normalize_advantages

from .evaluation import evaluate, random_policy_returns
from .exceptions import (
    CheckpointCorruptError,
    CheckpointDimError,
    CheckpointGroupError,
    CheckpointVersionError,
    DivergenceError,
)
from .mikt import MiktTrainer
from .mlpp import MlppTrainer, build_mlpp_networks
from .models import TrainConfig
from .networks import load_teacher, restore_solo
from .ppo import PPOTrainer
from .serializers import checkpoint_to_dict, load_checkpoint, save_checkpoint
from .services import make_trainer, pretrain_teacher


def tiny_config(**overrides):
    values = dict(
        algorithm="vpg",
        source_env="crawler-2",
        target_env="crawler-3",
        total_steps=256,
        steps_per_iteration=128,
        epochs=2,
        minibatch_size=32,
        hidden_units=8,
        encoder_units=8,
        seed=0,
    )
    values.update(overrides)
    return TrainConfig(**values)


def tiny_teacher(seed=0, **overrides):
    return PPOTrainer(tiny_config(algorithm="pretrain", seed=seed, **overrides)).checkpoint()


def first_minibatch(trainer, size=32):
    batch, _ = trainer.collect()
    return normalize_advantages(batch).take(np.arange(size))


class TrainConfigTests(TestCase):
    """Тесты конфигурации обучения"""

    def test_defaults(self):
        """Значения по умолчанию из таблицы гиперпараметров"""
        config = TrainConfig()
        self.assertEqual((config.epochs, config.minibatch_size), (10, 64))
        self.assertEqual((config.gamma, config.lam, config.clip_epsilon), (0.99, 0.95, 0.2))
        self.assertEqual(config.learning_rate, 3e-4)
        self.assertEqual(config.steps_per_iteration, 2048)
        self.assertEqual(config.total_steps, 200_000)

    def test_invalid(self):
        """Недопустимые значения отклоняются"""
        with self.assertRaises(ValueError):
            TrainConfig(algorithm="sac")
        with self.assertRaises(ValueError):
            TrainConfig(minibatch_size=4096)
        with self.assertRaises(ValueError):
            TrainConfig(gamma=1.0)
        with self.assertRaises(ValueError):
            TrainConfig(steps_per_iteration=100, minibatch_size=10, num_envs=3)

    def test_training_env(self):
        """pretrain обучается в исходной среде, остальные в целевой"""
        self.assertEqual(tiny_config(algorithm="pretrain").env_id, "crawler-2")
        self.assertEqual(tiny_config(algorithm="mikt").env_id, "crawler-3")
        self.assertEqual(tiny_config().iterations, 2)

    def test_hash_depends_on_values(self):
        """Хэш конфигурации меняется вместе с параметрами"""
        self.assertEqual(tiny_config().config_hash(), tiny_config().config_hash())
        self.assertNotEqual(tiny_config().config_hash(), tiny_config(seed=1).config_hash())


class CheckpointTests(TestCase):
    """Тесты сохранения и загрузки чекпойнтов"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "model.ckpt"

    def tearDown(self):
        self.tmp.cleanup()

    def _tampered(self, checkpoint, mutate):
        payload = checkpoint_to_dict(checkpoint)
        mutate(payload)
        self.path.write_text(json.dumps(payload), encoding="utf-8")
        return self.path

    def test_round_trip_bitwise(self):
        """Сохранение и загрузка сохраняют все числа побитово"""
        trainer = MiktTrainer(tiny_config(algorithm="mikt"), tiny_teacher())
        checkpoint = trainer.checkpoint()
        loaded = load_checkpoint(save_checkpoint(checkpoint, self.path))
        self.assertEqual(set(loaded.groups), {"policy", "log_std", "value", "encoder", "decoder", "mixing"})
        for name, arrays in checkpoint.groups.items():
            for original, restored in zip(arrays, loaded.groups[name]):
                self.assertEqual(original.tobytes(), restored.tobytes())
        self.assertEqual(loaded.fingerprint(), checkpoint.fingerprint())
        self.assertEqual(loaded.metadata, checkpoint.metadata)

    def test_pretrain_metadata(self):
        """Чекпойнт учителя записывает среду crawler-1 и размерности (3, 1)"""
        checkpoint = PPOTrainer(tiny_config(algorithm="pretrain", source_env="crawler-1")).checkpoint()
        loaded = load_checkpoint(save_checkpoint(checkpoint, self.path))
        self.assertEqual(loaded.env_id, "crawler-1")
        self.assertEqual(tuple(loaded.dims), (3, 1))
        self.assertEqual(loaded.algorithm, "pretrain")

    def test_tampered_dims(self):
        """Изменённые размерности: ошибка размерностей"""
        path = self._tampered(tiny_teacher(), lambda p: p.update(dims=[7, 3]))
        with self.assertRaises(CheckpointDimError):
            load_checkpoint(path)

    def test_unknown_group(self):
        """Неизвестная группа параметров отклоняется"""
        path = self._tampered(tiny_teacher(), lambda p: p["groups"].update(critic=p["groups"]["value"]))
        with self.assertRaises(CheckpointGroupError):
            load_checkpoint(path)

    def test_version_mismatch(self):
        """Другая версия формата"""
        path = self._tampered(tiny_teacher(), lambda p: p.update(version=99))
        with self.assertRaises(CheckpointVersionError):
            load_checkpoint(path)

    def test_corrupt_file(self):
        """Повреждённый файл и обрезанные данные массива"""
        self.path.write_text("{not json", encoding="utf-8")
        with self.assertRaises(CheckpointCorruptError):
            load_checkpoint(self.path)

        def truncate(payload):
            payload["groups"]["policy"][0]["data"] = payload["groups"]["policy"][0]["data"][:8]

        with self.assertRaises(CheckpointCorruptError):
            load_checkpoint(self._tampered(tiny_teacher(), truncate))

    def test_errors_are_distinct(self):
        """Классы ошибок различны"""
        errors = {CheckpointVersionError, CheckpointCorruptError, CheckpointDimError, CheckpointGroupError}
        self.assertEqual(len(errors), 4)
        for error in errors:
            self.assertTrue(issubclass(error, ValueError))

    def test_teacher_restored_frozen(self):
        """Учитель загружается с теми же весами и замороженным"""
        checkpoint = tiny_teacher(seed=3)
        policy, value = load_teacher(checkpoint)
        self.assertFalse(policy.group.trainable)
        for original, restored in zip(checkpoint.groups["policy"], policy.group.values()):
            np.testing.assert_array_equal(original, restored)
        trainer = MiktTrainer(tiny_config(algorithm="mikt"), checkpoint)
        for group in trainer.pair.teacher_groups:
            self.assertFalse(group.trainable, group.name)


class GradientRoutingTests(TestCase):
    """Маршрутизация градиентов слагаемых по группам"""

    EXPECTED = {
        "policy": {"policy", "log_std", "encoder", "mixing"},
        "value": {"value", "encoder", "mixing"},
        "kl": {"policy", "log_std", "encoder", "mixing"},
        "mi": {"encoder", "decoder"},
        "coupling": {"mixing"},
    }
    GROUPS = {"policy", "log_std", "value", "encoder", "decoder", "mixing"}

    def _probes(self, loss, **overrides):
        trainer = MiktTrainer(tiny_config(algorithm="mikt", **overrides), tiny_teacher())
        minibatch = first_minibatch(trainer)
        if loss == "kl":
            minibatch = replace(minibatch, old_means=minibatch.old_means + 0.3)
        before = trainer.teacher_state()
        report = trainer.update_minibatch(minibatch, losses={loss})
        self.assertEqual(trainer.teacher_state(), before)
        return report.probes

    def test_routing_matrix(self):
        """Каждое слагаемое в изоляции достигает ровно предписанных групп"""
        for loss, expected in self.EXPECTED.items():
            probes = self._probes(loss)
            for group in self.GROUPS:
                norm = probes[(loss, group)]
                if group in expected:
                    self.assertGreater(norm, 0.0, msg=f"{loss} -> {group}")
                else:
                    self.assertEqual(norm, 0.0, msg=f"{loss} -> {group}")
            self.assertFalse(any(group.startswith("teacher") for _, group in probes))

    def test_without_mi(self):
        """use_mi = False: градиент L_MI на энкодер равен нулю"""
        trainer = MiktTrainer(tiny_config(algorithm="mikt", use_mi=False), tiny_teacher())
        minibatch = first_minibatch(trainer)
        for _ in range(3):
            report = trainer.update_minibatch(minibatch)
            self.assertEqual(report.probes[("mi", "encoder")], 0.0)
            self.assertGreater(report.probes[("mi", "decoder")], 0.0)
            self.assertGreater(report.mi, 0.0)

    def test_without_rl_gradients(self):
        """rl_grads_to_encoder = False: градиент L_PPO на энкодер равен нулю"""
        trainer = MiktTrainer(
            tiny_config(algorithm="mikt", rl_grads_to_encoder=False), tiny_teacher()
        )
        minibatch = first_minibatch(trainer)
        for _ in range(3):
            report = trainer.update_minibatch(minibatch)
            self.assertEqual(report.probes[("policy", "encoder")], 0.0)
            self.assertEqual(report.probes[("value", "encoder")], 0.0)
            self.assertGreater(report.probes[("mi", "encoder")], 0.0)

    def test_without_kl(self):
        """use_kl_reg = False: KL считается, но не обучает и не входит в сумму"""
        trainer = MiktTrainer(tiny_config(algorithm="mikt", use_kl_reg=False), tiny_teacher())
        minibatch = replace(first_minibatch(trainer), old_means=np.zeros((32, 3)) + 0.3)
        report = trainer.update_minibatch(minibatch)
        self.assertGreater(report.kl, 0.0)
        self.assertEqual(report.weights["kl"], 0.0)
        self.assertTrue(all(report.probes[("kl", g)] == 0.0 for g in self.GROUPS))

    def test_coupling_drift(self):
        """Только потеря связывания: средний p строго растёт 100 обновлений"""
        trainer = MiktTrainer(tiny_config(algorithm="mikt"), tiny_teacher())
        minibatch = first_minibatch(trainer)
        frozen = {g.name: g.fingerprint() for g in trainer.trainable_groups if g.name != "mixing"}
        previous = np.mean(np.concatenate(trainer.mixing_values()))
        for _ in range(100):
            trainer.update_minibatch(minibatch, losses={"coupling"})
            current = np.mean(np.concatenate(trainer.mixing_values()))
            self.assertGreater(current, previous)
            previous = current
        for group in trainer.trainable_groups:
            if group.name != "mixing":
                self.assertEqual(group.fingerprint(), frozen[group.name])

    def test_coupling_ramp(self):
        """Линейное нарастание c_couple по шагам среды"""
        trainer = MiktTrainer(
            tiny_config(algorithm="mikt", c_couple=0.1, couple_ramp_steps=256), tiny_teacher()
        )
        self.assertEqual(trainer.coupling_coefficient(), 0.0)
        trainer.collect()
        self.assertAlmostEqual(trainer.coupling_coefficient(), 0.05)
        trainer.collect()
        trainer.collect()
        self.assertAlmostEqual(trainer.coupling_coefficient(), 0.1)

    def test_total_is_weighted_sum(self):
        """Сумма отчёта равна взвешенной сумме слагаемых"""
        trainer = MiktTrainer(tiny_config(algorithm="mikt"), tiny_teacher())
        report = trainer.update_minibatch(first_minibatch(trainer))
        expected = report.policy + report.value + report.mi + 1e-3 * report.coupling + 0.5 * report.kl
        self.assertAlmostEqual(report.total, expected, places=12)


class RolloutTests(TestCase):
    """Тесты сбора траекторий"""

    def test_ratio_one_at_first_minibatch(self):
        """Логарифмы вероятностей сбора совпадают с текущей политикой"""
        for trainer in (
            PPOTrainer(tiny_config()),
            MiktTrainer(tiny_config(algorithm="mikt"), tiny_teacher()),
        ):
            batch, _ = trainer.collect()
            np.testing.assert_allclose(
                trainer.log_probs(batch.states, batch.actions), batch.log_probs, rtol=0, atol=1e-12
            )

    def test_batch_size_and_episodes(self):
        """Пакет из steps_per_iteration шагов, эпизод завершается на 200-м шаге"""
        trainer = PPOTrainer(tiny_config(steps_per_iteration=256, minibatch_size=64))
        batch, returns = trainer.collect()
        self.assertEqual(len(batch), 256)
        self.assertEqual(len(returns), 1)
        self.assertEqual(np.flatnonzero(batch.dones).tolist(), [199])
        self.assertEqual(trainer.env_steps, 256)

    def test_parallel_workers(self):
        """Несколько рабочих: отрезки равной длины, результат воспроизводим"""
        first, _ = PPOTrainer(tiny_config(num_envs=4)).collect()
        second, _ = PPOTrainer(tiny_config(num_envs=4)).collect()
        self.assertEqual(len(first), 128)
        np.testing.assert_array_equal(first.states, second.states)
        np.testing.assert_array_equal(first.advantages, second.advantages)


class TrainingRunTests(TestCase):
    """Тесты полного цикла обучения"""

    def _curve(self, config, teacher=None):
        stats = []
        make_trainer(config, teacher).run(stats.append)
        return [(s.env_steps, s.episode_returns, s.report.as_dict(), s.report.p_policy.tolist()) for s in stats]

    def test_vpg_deterministic(self):
        """Одинаковый seed: одинаковая кривая обучения"""
        config = tiny_config(total_steps=512, steps_per_iteration=256)
        self.assertEqual(self._curve(config), self._curve(config))

    def test_mikt_deterministic_and_teacher_immutable(self):
        """MIKT воспроизводим, учитель не меняется"""
        teacher = tiny_teacher()
        config = tiny_config(algorithm="mikt")
        self.assertEqual(self._curve(config, teacher), self._curve(config, teacher))
        trainer = MiktTrainer(config, teacher)
        before = trainer.teacher_state()
        checkpoint = trainer.run()
        self.assertEqual(trainer.teacher_state(), before)
        self.assertFalse(trainer.pair.coupled)
        self.assertEqual(checkpoint.metadata["source_env"], "crawler-2")
        self.assertEqual(checkpoint.metadata["env_steps"], 256)

    def test_vpg_has_no_transfer_terms(self):
        """У VPG нет MI, связывания и весов смешивания"""
        stats = []
        PPOTrainer(tiny_config()).run(stats.append)
        for item in stats:
            self.assertEqual((item.report.mi, item.report.coupling, item.report.kl), (0.0, 0.0, 0.0))
            self.assertEqual(item.report.p_policy.size, 0)

    def test_divergence(self):
        """Нечисловые параметры прерывают обучение"""
        trainer = PPOTrainer(tiny_config())
        minibatch = first_minibatch(trainer)
        trainer.policy.mean_net.layers[0][0].value[0, 0] = np.nan
        with self.assertRaises(DivergenceError):
            trainer.update_minibatch(minibatch)

    def test_teacher_required(self):
        """mikt и mlpp без учителя"""
        with self.assertRaises(ValueError):
            make_trainer(tiny_config(algorithm="mikt"))
        with self.assertRaises(ValueError):
            pretrain_teacher(tiny_config(algorithm="vpg"))

    def test_teacher_dims_must_match_architecture(self):
        """Учитель другой ширины несовместим со студентом"""
        with self.assertRaises(ArchitectureError):
            MiktTrainer(tiny_config(algorithm="mikt"), tiny_teacher(hidden_units=16))


class MlppTests(TestCase):
    """Тесты базовой линии MLPP"""

    def test_middle_stack_copied(self):
        """Промежуточный слой совпадает с учительским побитово"""
        teacher = tiny_teacher(seed=4)
        trainer = MlppTrainer(tiny_config(algorithm="mlpp"), teacher)
        teacher_policy, teacher_value = restore_solo(teacher)
        for student, source in ((trainer.policy.mean_net, teacher_policy.mean_net), (trainer.value.net, teacher_value.net)):
            for target, original in zip(student.layers[1], source.layers[1]):
                self.assertEqual(target.value.tobytes(), original.value.tobytes())

    def test_student_trainable_with_frozen_teacher(self):
        """Учитель загружается замороженным, студент MLPP обучается целиком"""
        trainer = MlppTrainer(tiny_config(algorithm="mlpp"), tiny_teacher(seed=4))
        for group in trainer.policy.groups + [trainer.value.group]:
            self.assertTrue(group.trainable, group.name)

    def test_new_io_layers(self):
        """Входной и выходной слои под размерности цели"""
        teacher_policy, teacher_value = restore_solo(tiny_teacher())
        policy, value = build_mlpp_networks(
            teacher_policy, teacher_value, make_env("crawler-4"), np.random.default_rng(0)
        )
        self.assertEqual(policy.mean_net.layers[0][0].shape, [9, 8])
        self.assertEqual(policy.mean_net.layers[-1][0].shape, [8, 4])
        self.assertEqual(teacher_policy.mean_net.layers[0][0].shape, [5, 8])
        self.assertTrue(policy.group.trainable)

    def test_single_hidden_layer_teacher(self):
        """Без промежуточного стека MLPP невозможен"""
        teacher = tiny_teacher(hidden_layers=1)
        with self.assertRaises(ArchitectureError):
            MlppTrainer(tiny_config(algorithm="mlpp", hidden_layers=1), teacher)

    def test_trains(self):
        """Обучение идёт и даёт ту же схему отчёта, что VPG"""
        stats = []
        checkpoint = MlppTrainer(tiny_config(algorithm="mlpp"), tiny_teacher()).run(stats.append)
        self.assertEqual(len(stats), 2)
        self.assertEqual(set(checkpoint.groups), {"policy", "log_std", "value"})
        self.assertEqual(checkpoint.algorithm, "mlpp")


class EvaluationTests(TestCase):
    """Тесты оценки политики"""

    def test_zero_policy_zero_return(self):
        """Нулевые веса: нулевое действие и нулевая отдача"""
        trainer = PPOTrainer(tiny_config())
        for param in trainer.policy.group.params:
            param.value[...] = 0.0
        mean, std = evaluate(trainer.checkpoint(), make_env("crawler-3"), episodes=3, seed=0)
        self.assertEqual((mean, std), (0.0, 0.0))

    def test_deterministic(self):
        """Одинаковые чекпойнт и seed: одинаковая статистика"""
        checkpoint = PPOTrainer(tiny_config(seed=5)).checkpoint()
        env = make_env("crawler-3")
        self.assertEqual(evaluate(checkpoint, env, 3, seed=1), evaluate(checkpoint, env, 3, seed=1))

    def test_single_episode_zero_std(self):
        """Один эпизод: std = 0"""
        _, std = evaluate(PPOTrainer(tiny_config()).checkpoint(), make_env("crawler-3"), 1, seed=0)
        self.assertEqual(std, 0.0)

    def test_dim_mismatch(self):
        """Чекпойнт другой среды"""
        with self.assertRaises(CheckpointDimError):
            evaluate(tiny_teacher(), make_env("crawler-4"), 1)

    def test_coupled_evaluation(self):
        """Чекпойнт MIKT оценивается в связке с учителем"""
        teacher = tiny_teacher()
        checkpoint = MiktTrainer(tiny_config(algorithm="mikt"), teacher).checkpoint()
        env = make_env("crawler-3")
        coupled = evaluate(checkpoint, env, 2, seed=0, teacher=teacher)
        self.assertEqual(coupled, evaluate(checkpoint, env, 2, seed=0, teacher=teacher))

    def test_random_baseline(self):
        """Случайная политика воспроизводима"""
        env = make_env("crawler-2")
        self.assertEqual(random_policy_returns(env, 3, seed=2), random_policy_returns(env, 3, seed=2))


@pytest.mark.slow
class PretrainEfficacyTests(TestCase):
    """Предобучение учителя заметно лучше случайной политики"""

    def test_crawler_one(self):
        """crawler-1, 100k шагов: отдача выше случайной на 3 стандартных отклонения"""
        env = make_env("crawler-1")
        random_mean, random_std = random_policy_returns(env, episodes=20, seed=0)
        config = TrainConfig(algorithm="pretrain", source_env="crawler-1", total_steps=100_000)
        checkpoint = pretrain_teacher(config)
        mean, _ = evaluate(checkpoint, env, episodes=5, seed=0)
        self.assertGreater(mean, random_mean + 3 * random_std)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_checkpoint(save_checkpoint(checkpoint, Path(tmp) / "teacher.ckpt"))
        self.assertEqual(evaluate(loaded, env, episodes=5, seed=0)[0], mean)
