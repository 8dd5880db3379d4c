from unittest import TestCase

import numpy as np

from ndmath.exceptions import ShapeError

from .crawler import CrawlerEnv, reset, step
from .exceptions import EpisodeFinishedError, UnknownEnvError
from .models import EnvState, RngStream
from .registry import ENV_REGISTRY, list_envs, make_env


def rollout(spec, seed, actions):
    state = reset(spec, RngStream(seed))
    states, rewards = [state], []
    for action in actions:
        state, reward, _ = step(spec, state, action)
        states.append(state)
        rewards.append(reward)
    return states, rewards


class RegistryTests(TestCase):
    """Тесты реестра сред"""

    def test_dimension_law(self):
        """Состояние 2k + 1, действие k для всех сред"""
        self.assertEqual(make_env("crawler-2").dims, (5, 2))
        self.assertEqual(make_env("crawler-4").dims, (9, 4))
        for spec in ENV_REGISTRY.values():
            self.assertEqual(spec.dims, (2 * spec.segments + 1, spec.segments))

    def test_crippled_keeps_dims(self):
        """Повреждённый вариант сохраняет размерности"""
        spec = make_env("crawler-4-cp1")
        self.assertEqual(spec.dims, (9, 4))
        self.assertEqual(spec.disabled, 1)

    def test_unknown_env_lists_registry(self):
        """Неизвестный идентификатор: ошибка со списком сред"""
        with self.assertRaises(UnknownEnvError) as ctx:
            make_env("crawler-9")
        self.assertIn("crawler-8", str(ctx.exception))
        self.assertIsInstance(ctx.exception, KeyError)

    def test_listing_order(self):
        """Список упорядочен по числу сегментов"""
        segments = [spec.segments for spec in list_envs()]
        self.assertEqual(segments, sorted(segments))
        self.assertEqual(list_envs()[0].id, "crawler-1")


class ResetTests(TestCase):
    """Тесты начального состояния"""

    def test_zero_noise(self):
        """Без шума состояние нулевое"""
        state = reset(make_env("crawler-3"), RngStream(0), zero_noise=True)
        np.testing.assert_array_equal(state.observation(), np.zeros(7))
        self.assertEqual(state.counter, 0)

    def test_same_seed(self):
        """Одинаковый seed даёт одинаковые состояния"""
        spec = make_env("crawler-4")
        first, second = reset(spec, RngStream(42)), reset(spec, RngStream(42))
        np.testing.assert_array_equal(first.observation(), second.observation())

    def test_uniform_angles(self):
        """1000 начальных состояний: средний угол около 0, |theta| <= 0.1"""
        spec, rng = make_env("crawler-3"), RngStream(7)
        thetas = np.array([reset(spec, rng).theta for _ in range(1000)])
        self.assertTrue(np.all(np.abs(thetas) <= 0.1))
        self.assertTrue(np.all(np.abs(thetas.mean(axis=0)) < 0.01))


class StepTests(TestCase):
    """Тесты динамики"""

    def test_fixed_point(self):
        """Нулевое состояние и нулевое действие: состояние не меняется, награда 0"""
        spec = make_env("crawler-2")
        state = reset(spec, RngStream(0), zero_noise=True)
        next_state, reward, done = step(spec, state, np.zeros(2))
        np.testing.assert_array_equal(next_state.observation(), np.zeros(5))
        self.assertEqual(reward, 0.0)
        self.assertFalse(done)

    def test_single_segment_unit_action(self):
        """k = 1, a = 1 из нулевого состояния"""
        spec = make_env("crawler-1")
        state = reset(spec, RngStream(0), zero_noise=True)
        next_state, reward, _ = step(spec, state, np.array([1.0]))
        self.assertAlmostEqual(next_state.omega[0], 0.05, places=15)
        self.assertAlmostEqual(next_state.theta[0], 0.0025, places=15)
        self.assertAlmostEqual(next_state.velocity, 0.05 * np.cos(0.0025), places=15)
        self.assertAlmostEqual(next_state.velocity, 0.0499997, places=7)
        self.assertAlmostEqual(reward, 0.04, places=6)

    def test_action_clipping(self):
        """Действие [2] клиппируется до [1]"""
        spec = make_env("crawler-1")
        actions = np.linspace(-3.0, 3.0, 50).reshape(-1, 1)
        clipped, _ = rollout(spec, 3, np.clip(actions, -1.0, 1.0))
        raw, _ = rollout(spec, 3, actions)
        for a, b in zip(clipped, raw):
            np.testing.assert_array_equal(a.observation(), b.observation())

    def test_disabled_action_has_no_effect(self):
        """В crawler-4-cp1 последнее действие не влияет на динамику"""
        spec = make_env("crawler-4-cp1")
        rng = np.random.default_rng(0)
        actions = rng.uniform(-1, 1, size=(30, 4))
        altered = actions.copy()
        altered[:, -1] = rng.uniform(-1, 1, size=30)
        first, first_rewards = rollout(spec, 1, actions)
        second, second_rewards = rollout(spec, 1, altered)
        self.assertEqual(first_rewards, second_rewards)
        np.testing.assert_array_equal(first[-1].observation(), second[-1].observation())

    def test_reversed_reward(self):
        """crawler-k-rev награждает движение назад"""
        forward, backward = make_env("crawler-2"), make_env("crawler-2-rev")
        actions = np.ones((5, 2))
        _, forward_rewards = rollout(forward, 0, actions)
        _, backward_rewards = rollout(backward, 0, actions)
        for f, b in zip(forward_rewards, backward_rewards):
            self.assertAlmostEqual(f + b, -2 * 0.01 * 2.0, places=12)

    def test_update_order(self):
        """omega обновляется раньше theta, тяга использует новые углы"""
        spec = make_env("crawler-2")
        state = EnvState(np.array([0.3, -0.2]), np.array([0.1, 0.4]), 0.5, 0)
        action = np.array([0.7, -0.4])
        next_state, reward, _ = step(spec, state, action)
        omega = state.omega + 0.05 * (action - 0.1 * state.omega - 0.5 * state.theta)
        theta = state.theta + 0.05 * omega
        velocity = 0.975 * 0.5 + 0.05 * np.sum(action * np.cos(theta)) / 2
        np.testing.assert_allclose(next_state.omega, omega, rtol=1e-15)
        np.testing.assert_allclose(next_state.theta, theta, rtol=1e-15)
        self.assertAlmostEqual(next_state.velocity, velocity, places=12)
        self.assertAlmostEqual(reward, velocity - 0.01 * np.dot(action, action), places=12)

    def test_wrong_action_shape(self):
        """Действие неверной размерности"""
        spec = make_env("crawler-2")
        with self.assertRaises(ShapeError):
            step(spec, reset(spec, RngStream(0)), np.zeros(3))


class EpisodeTests(TestCase):
    """Тесты эпизодов"""

    def test_fixed_horizon_and_step_after_done(self):
        """Эпизод длится ровно 200 шагов, после done шаг запрещён"""
        env = CrawlerEnv(make_env("crawler-2"), RngStream(0))
        env.reset()
        dones = [env.step(np.zeros(2))[2] for _ in range(200)]
        self.assertEqual(dones, [False] * 199 + [True])
        with self.assertRaises(EpisodeFinishedError):
            env.step(np.zeros(2))

    def test_velocity_bounded(self):
        """|v| <= 2 и награда в [-(2 + 0.01 k), 2] при любых действиях"""
        spec = make_env("crawler-3")
        actions = np.random.default_rng(5).choice([-1.0, 1.0], size=(200, 3))
        states, rewards = rollout(spec, 5, actions)
        self.assertTrue(all(abs(s.velocity) <= 2.0 for s in states))
        self.assertTrue(all(-(2 + 0.03) <= r <= 2.0 for r in rewards))

    def test_determinism(self):
        """Одинаковые seed и действия дают побитово одинаковые траектории"""
        spec = make_env("crawler-5")
        actions = np.random.default_rng(9).normal(size=(200, 5))
        first, first_rewards = rollout(spec, 11, actions)
        second, second_rewards = rollout(spec, 11, actions)
        self.assertEqual(first_rewards, second_rewards)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.observation(), b.observation())

    def test_episode_return(self):
        """CrawlerEnv накапливает отдачу эпизода"""
        env = CrawlerEnv(make_env("crawler-1"), RngStream(0))
        env.reset()
        total = sum(env.step(np.array([0.5]))[1] for _ in range(10))
        self.assertAlmostEqual(env.episode_return, total, places=12)


class RngStreamTests(TestCase):
    """Тесты потоков случайных чисел"""

    def test_reproducible(self):
        """Одинаковый seed: одинаковые значения"""
        np.testing.assert_array_equal(RngStream(5).normal(size=10), RngStream(5).normal(size=10))

    def test_spawned_streams_differ_and_reproduce(self):
        """Дочерние потоки различны и воспроизводимы"""
        first = [s.normal(size=4) for s in RngStream(3).spawn(3)]
        second = [s.normal(size=4) for s in RngStream(3).spawn(3)]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(first[0], first[1]))

    def test_position_advances(self):
        """Счётчик генератора растёт с числом запросов"""
        stream = RngStream(0)
        start = stream.position
        stream.uniform(size=100)
        self.assertGreater(stream.position, start)
        self.assertEqual(stream.algorithm, "philox")
