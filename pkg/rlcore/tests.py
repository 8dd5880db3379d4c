from unittest import TestCase

import numpy as np

from ndmath import ops
from ndmath.exceptions import ShapeError
from ndmath.gradcheck import check_gradients
from ndmath.models import AdamConfig, Graph
from ndmath.optim import adam_step
from nets.distributions import gaussian_log_prob
from nets.models import (
    CoupledNetworkPair,
    GaussianPolicy,
    MixingWeights,
    MlpSpec,
    ValueNet,
    VariationalDecoder,
)

from .advantages import compute_gae, normalize_advantages
from .exceptions import NonFiniteError
from .losses import coupling_loss, kl_regularizer, mi_loss, ppo_policy_loss, ppo_value_loss
from .models import LossReport, RolloutBatch, Transition


def make_batch(advantages, log_probs=None, value_targets=None, action_dim=1):
    advantages = np.asarray(advantages, dtype=np.float64)
    size = advantages.shape[0]
    zeros = np.zeros(size)
    return RolloutBatch(
        states=np.zeros((size, 1)),
        actions=np.zeros((size, action_dim)),
        rewards=zeros,
        values=zeros,
        log_probs=zeros if log_probs is None else np.asarray(log_probs, dtype=np.float64),
        dones=zeros,
        next_values=zeros,
        advantages=advantages,
        value_targets=zeros if value_targets is None else np.asarray(value_targets, dtype=np.float64),
        old_means=np.zeros((size, action_dim)),
        old_log_stds=np.zeros((size, action_dim)),
    )


def random_pair(rng):
    """Крошечная связанная пара случайной архитектуры со случайными весами"""
    source_dim, target_dim, action_dim = rng.integers(1, 4, size=3)
    layers, units = int(rng.integers(1, 3)), int(rng.integers(2, 4))
    teacher_policy = GaussianPolicy(
        MlpSpec(int(source_dim), 1, layers, units), rng, name="teacher_policy"
    )
    teacher_value = ValueNet(MlpSpec(int(source_dim), 1, layers, units), rng, name="teacher_value")
    pair = CoupledNetworkPair.build(
        teacher_policy,
        teacher_value,
        int(target_dim),
        int(action_dim),
        rng,
        encoder_layers=1,
        encoder_units=units,
    )
    for group in pair.teacher_groups + pair.trainable_groups:
        for param in group.params:
            param.value[...] = rng.normal(scale=0.5, size=param.value.shape)
    return pair


def brute_force_gae(rewards, values, next_values, dones, gamma, lam):
    deltas = rewards + gamma * next_values - values
    advantages = np.zeros(len(rewards))
    for t in range(len(rewards)):
        weight = 1.0
        for k in range(t, len(rewards)):
            advantages[t] += weight * deltas[k]
            if dones[k]:
                break
            weight *= gamma * lam
    return advantages


def discounted_returns(rewards, gamma):
    return np.array(
        [sum(gamma**k * r for k, r in enumerate(rewards[t:])) for t in range(len(rewards))]
    )


class GaeTests(TestCase):
    """Тесты оценки преимуществ"""

    def test_three_step_example(self):
        """r = 1, V = 0.5, bootstrap 0, gamma 0.99, lambda 0.95"""
        advantages, targets = compute_gae([1, 1, 1], [0.5] * 3, 0.0, 0.99, 0.95)
        np.testing.assert_allclose(advantages, [2.3730676, 1.46525, 0.5], atol=1e-6)
        np.testing.assert_allclose(targets, advantages + 0.5)

    def test_brute_force_sum(self):
        """Рекурсия совпадает с прямой суммой (gamma lambda)^k delta"""
        rng = np.random.default_rng(0)
        rewards, values = rng.normal(size=(2, 12))
        bootstrap, gamma, lam = 0.7, 0.97, 0.9
        advantages, _ = compute_gae(rewards, values, bootstrap, gamma, lam)
        next_values = np.append(values[1:], bootstrap)
        deltas = rewards + gamma * next_values - values
        expected = [
            sum((gamma * lam) ** k * d for k, d in enumerate(deltas[t:])) for t in range(12)
        ]
        np.testing.assert_allclose(advantages, expected, rtol=1e-12, atol=1e-12)

    def test_random_segments_match_brute_force(self):
        """1000 случайных сегментов с концами эпизодов и бутстрепом по лимиту времени"""
        rng = np.random.default_rng(100)
        for _ in range(1000):
            size = int(rng.integers(1, 40))
            gamma, lam = rng.uniform(0.0, 0.999), rng.uniform(0.0, 1.0)
            rewards, values, next_values = rng.normal(size=(3, size))
            dones = (rng.uniform(size=size) < 0.1).astype(np.float64)
            advantages, targets = compute_gae(
                rewards, values, 0.0, gamma, lam, dones=dones, next_values=next_values
            )
            expected = brute_force_gae(rewards, values, next_values, dones, gamma, lam)
            np.testing.assert_allclose(advantages, expected, rtol=0.0, atol=1e-10)
            np.testing.assert_array_equal(targets, advantages + values)

    def test_zero_lambda_is_td_residual(self):
        """lambda = 0: A_t = delta_t"""
        rewards, values = np.array([0.3, -1.0, 2.0]), np.array([0.1, 0.2, -0.4])
        advantages, _ = compute_gae(rewards, values, 1.5, 0.9, 0.0)
        deltas = rewards + 0.9 * np.array([0.2, -0.4, 1.5]) - values
        np.testing.assert_array_equal(advantages, deltas)

    def test_unit_lambda_zero_values_reward_to_go(self):
        """lambda = 1, V = 0: A_t равно дисконтированной сумме наград"""
        rewards = np.random.default_rng(1).normal(size=20)
        advantages, _ = compute_gae(rewards, np.zeros(20), 0.0, 0.99, 1.0)
        np.testing.assert_allclose(advantages, discounted_returns(rewards, 0.99), atol=1e-10)

    def test_unit_lambda_targets_monte_carlo(self):
        """lambda = 1 на двух эпизодах: A + V равно отдаче Монте-Карло"""
        rng = np.random.default_rng(2)
        rewards, values = rng.normal(size=(2, 10))
        dones = np.zeros(10)
        dones[[3, 9]] = 1.0
        next_values = np.append(values[1:], 0.0)
        next_values[3] = 0.0
        _, targets = compute_gae(
            rewards, values, 0.0, 0.95, 1.0, dones=dones, next_values=next_values
        )
        expected = np.concatenate(
            [discounted_returns(rewards[:4], 0.95), discounted_returns(rewards[4:], 0.95)]
        )
        np.testing.assert_allclose(targets, expected, atol=1e-10)

    def test_done_stops_recursion(self):
        """Преимущество не переносится через границу эпизода"""
        advantages, _ = compute_gae(
            [0.0, 5.0], [0.0, 0.0], 0.0, 0.9, 1.0, dones=[1.0, 1.0], next_values=[0.0, 0.0]
        )
        np.testing.assert_array_equal(advantages, [0.0, 5.0])

    def test_invalid_arguments(self):
        """Длины и диапазоны параметров проверяются"""
        with self.assertRaises(ShapeError):
            compute_gae([1.0, 2.0], [0.0], 0.0, 0.99, 0.95)
        with self.assertRaises(ValueError):
            compute_gae([1.0], [0.0], 0.0, 1.0, 0.95)
        with self.assertRaises(ValueError):
            compute_gae([1.0], [0.0], 0.0, 0.99, 1.5)


class NormalizeTests(TestCase):
    """Тесты нормализации преимуществ"""

    def test_constant(self):
        """Постоянные преимущества дают нули"""
        batch = normalize_advantages(make_batch([0.1, 0.1, 0.1]))
        np.testing.assert_array_equal(batch.advantages, [0.0, 0.0, 0.0])

    def test_already_normalized(self):
        """[1, -1] не меняется"""
        batch = normalize_advantages(make_batch([1.0, -1.0]))
        np.testing.assert_allclose(batch.advantages, [1.0, -1.0])

    def test_random(self):
        """Среднее 0, стандартное отклонение 1"""
        batch = normalize_advantages(make_batch(np.random.default_rng(0).normal(3.0, 5.0, 500)))
        self.assertLessEqual(abs(batch.advantages.mean()), 1e-10)
        self.assertAlmostEqual(batch.advantages.std(), 1.0, delta=1e-6)

    def test_applied_once(self):
        """Повторная нормализация не меняет пакет"""
        batch = normalize_advantages(make_batch([1.0, 2.0, 6.0]))
        self.assertIs(normalize_advantages(batch), batch)
        self.assertTrue(batch.advantages_normalized)


class RolloutBatchTests(TestCase):
    """Тесты хранения траекторий"""

    def _segment(self, rewards, done_last=True):
        return [
            Transition(
                state=np.full(3, float(t)),
                action=np.array([0.1 * t]),
                reward=r,
                value=0.5,
                log_prob=-1.0,
                done=done_last and t == len(rewards) - 1,
                next_value=0.0 if t == len(rewards) - 1 else 0.5,
            )
            for t, r in enumerate(rewards)
        ]

    def test_segments_computed_independently(self):
        """Отрезки разных рабочих не смешиваются"""
        first, second = self._segment([1, 1, 1]), self._segment([1, 1, 1], done_last=False)
        batch = RolloutBatch.from_segments([first, second], 0.99, 0.95, policy_version=3)
        expected, _ = compute_gae([1, 1, 1], [0.5] * 3, 0.0, 0.99, 0.95)
        np.testing.assert_allclose(batch.advantages, np.concatenate([expected, expected]))
        self.assertEqual(len(batch), 6)
        self.assertEqual(batch.policy_version, 3)
        self.assertEqual(batch.states.shape, (6, 3))

    def test_read_only(self):
        """Массивы пакета нельзя изменить"""
        batch = RolloutBatch.from_segments([self._segment([1.0, 2.0])], 0.99, 0.95)
        with self.assertRaises(ValueError):
            batch.advantages[0] = 1.0

    def test_minibatches_cover_batch(self):
        """Минибатчи эпохи покрывают пакет ровно один раз"""
        batch = RolloutBatch.from_segments([self._segment(list(range(10)))], 0.99, 0.95)
        seen = np.concatenate(
            [mb.rewards for mb in batch.minibatches(4, np.random.default_rng(0))]
        )
        np.testing.assert_array_equal(np.sort(seen), np.arange(10.0))

    def test_non_finite_log_prob(self):
        """log-prob перехода должен быть конечным"""
        with self.assertRaises(NonFiniteError):
            Transition(np.zeros(1), np.zeros(1), 0.0, 0.0, float("nan"), False, 0.0)


class PolicyLossTests(TestCase):
    """Тесты клиппированной потери PPO"""

    def _loss(self, ratio, advantage, epsilon=0.2):
        batch = make_batch([advantage])
        return ppo_policy_loss(batch, np.log([ratio]), epsilon).item()

    def test_unit_ratio(self):
        """r = 1, A = 2: -2"""
        self.assertAlmostEqual(self._loss(1.0, 2.0), -2.0, places=12)

    def test_clipped_positive(self):
        """r = 1.5, A = 1: -1.2"""
        self.assertAlmostEqual(self._loss(1.5, 1.0), -1.2, places=12)

    def test_pessimistic_negative(self):
        """r = 0.5, A = -1: +0.8"""
        self.assertAlmostEqual(self._loss(0.5, -1.0), 0.8, places=12)

    def test_at_old_policy_equals_negative_mean(self):
        """При theta = theta_old потеря равна -mean(A), градиент не клиппирован"""
        advantages = np.array([0.5, -2.0, 3.0])
        policy = GaussianPolicy(MlpSpec(1, 1, 1, 2), np.random.default_rng(0))
        states, actions = np.array([[0.1], [0.4], [-0.3]]), np.array([[0.2], [-0.1], [0.0]])
        old = gaussian_log_prob(*policy.forward(states), actions).data
        batch = make_batch(advantages, log_probs=old)
        graph = Graph()
        new = gaussian_log_prob(*policy.forward(states, graph), actions)
        loss = ppo_policy_loss(batch, new)
        self.assertAlmostEqual(loss.item(), -advantages.mean(), places=12)
        graph.backward(loss)
        clipped_grad = policy.log_std.grad.copy()
        policy.log_std.grad.fill(0.0)
        graph = Graph()
        new = gaussian_log_prob(*policy.forward(states, graph), actions)
        surrogate = ops.scalar_affine(ops.mean(ops.mul(ops.exp(ops.sub(new, old)), advantages)), -1.0)
        graph.backward(surrogate)
        np.testing.assert_allclose(clipped_grad, policy.log_std.grad, rtol=1e-12)

    def test_lower_bound(self):
        """min(.,.) не превосходит r A"""
        rng = np.random.default_rng(4)
        ratios, advantages = np.exp(rng.normal(scale=0.5, size=200)), rng.normal(size=200)
        for r, a in zip(ratios, advantages):
            self.assertLessEqual(-self._loss(r, a), r * a + 1e-12)

    def test_non_finite_ratio_reports_index(self):
        """Нечисловое отношение вероятностей с указанием позиции"""
        batch = make_batch([1.0, 1.0, 1.0])
        with np.errstate(over="ignore"):
            with self.assertRaises(NonFiniteError) as ctx:
                ppo_policy_loss(batch, np.array([0.0, 0.0, 1e4]))
        self.assertEqual(ctx.exception.index, 2)

    def test_gradient_matches_finite_differences(self):
        """Градиент потери PPO на крошечной политике"""
        rng = np.random.default_rng(5)
        policy = GaussianPolicy(MlpSpec(1, 1, 1, 2), rng)
        for param in policy.group.params:
            param.value[...] = rng.normal(size=param.value.shape)
        states, actions = rng.normal(size=(6, 1)), rng.normal(size=(6, 1))
        old = gaussian_log_prob(*policy.forward(states), actions).data + rng.normal(scale=0.3, size=6)
        batch = make_batch(rng.normal(size=6), log_probs=old)

        def loss_fn(graph):
            return ppo_policy_loss(batch, gaussian_log_prob(*policy.forward(states, graph), actions))

        self.assertLess(check_gradients(loss_fn, policy.group.params + [policy.log_std]), 1e-4)


class ValueLossTests(TestCase):
    """Тесты потери ценности"""

    def test_exact_targets(self):
        """V = V_targ: 0"""
        batch = make_batch([0.0, 0.0], value_targets=[1.5, -2.0])
        self.assertEqual(ppo_value_loss(batch, np.array([1.5, -2.0])).item(), 0.0)

    def test_unit_residuals(self):
        """V - V_targ = [1, -1]: 1"""
        batch = make_batch([0.0, 0.0], value_targets=[0.0, 0.0])
        self.assertEqual(ppo_value_loss(batch, np.array([1.0, -1.0])).item(), 1.0)

    def test_random_matches_mse(self):
        """Совпадает с независимо вычисленным MSE"""
        rng = np.random.default_rng(6)
        targets, values = rng.normal(size=(2, 50))
        batch = make_batch(np.zeros(50), value_targets=targets)
        self.assertAlmostEqual(
            ppo_value_loss(batch, values).item(), np.mean((values - targets) ** 2), places=12
        )

    def test_gradient_matches_finite_differences(self):
        """Градиент MSE на крошечной сети ценности"""
        rng = np.random.default_rng(7)
        value = ValueNet(MlpSpec(1, 1, 1, 2), rng)
        states = rng.normal(size=(5, 1))
        batch = make_batch(np.zeros(5), value_targets=rng.normal(size=5))

        def loss_fn(graph):
            return ppo_value_loss(batch, value.forward(states, graph))

        self.assertLess(check_gradients(loss_fn, value.group.params), 1e-4)


class CouplingLossTests(TestCase):
    """Тесты потери связывания"""

    def test_all_ones(self):
        """p = 1 везде: 0"""
        mixing = MixingWeights(2, 2)
        mixing.force(policy=[1.0, 1.0], value=[1.0, 1.0])
        self.assertEqual(coupling_loss(mixing).item(), 0.0)

    def test_inverse_e(self):
        """p = 1/e везде, по два слоя: 2"""
        mixing = MixingWeights(2, 2)
        mixing.force(policy=[np.exp(-1.0)] * 2, value=[np.exp(-1.0)] * 2)
        self.assertAlmostEqual(coupling_loss(mixing).item(), 2.0, places=12)

    def test_averaging(self):
        """p_pi = (1/e, 1), p_v = (1,): 0.5"""
        mixing = MixingWeights(2, 1)
        mixing.force(policy=[np.exp(-1.0), 1.0], value=[1.0])
        self.assertAlmostEqual(coupling_loss(mixing).item(), 0.5, places=12)

    def test_decreasing_and_pushes_logits_up(self):
        """Потеря неотрицательна, убывает по p, градиент поднимает p~"""
        mixing = MixingWeights(2, 2)
        previous = np.inf
        for logit in np.linspace(-5.0, 5.0, 21):
            for param in mixing.group.params:
                param.value[...] = logit
            value = coupling_loss(mixing).item()
            self.assertGreaterEqual(value, 0.0)
            self.assertLess(value, previous)
            previous = value
        graph = Graph()
        graph.backward(coupling_loss(mixing, graph))
        for param in mixing.group.params:
            self.assertLess(param.grad[0], 0.0)

    def test_gradient_matches_finite_differences(self):
        """Градиент по p~"""
        mixing = MixingWeights(2, 3)
        rng = np.random.default_rng(8)
        for param in mixing.group.params:
            param.value[...] = rng.normal()
        error = check_gradients(lambda graph: coupling_loss(mixing, graph), mixing.group.params)
        self.assertLess(error, 1e-4)


class MiLossTests(TestCase):
    """Тесты вариационной потери взаимной информации"""

    def _decoder(self, source_dim, target_dim):
        decoder = VariationalDecoder(MlpSpec(source_dim, target_dim, hidden_units=4))
        for param in decoder.group.params:
            param.value[...] = 0.0
        return decoder

    def test_zero_residual(self):
        """mean = s, единичная дисперсия, d = 2: log(2 pi)"""
        decoder = self._decoder(2, 2)
        decoder.net.layers[-1][1].value[...] = [0.3, 0.7]
        value = mi_loss(decoder, np.array([[0.3, 0.7]]), np.zeros((1, 2))).item()
        self.assertAlmostEqual(value, 1.83788, places=5)

    def test_unit_residual(self):
        """Невязка 1 в одной координате: log(2 pi) + 0.5"""
        decoder = self._decoder(2, 2)
        value = mi_loss(decoder, np.array([[1.0, 0.0]]), np.zeros((1, 2))).item()
        self.assertAlmostEqual(value, 2.33788, places=5)

    def test_batch_is_mean(self):
        """Пакетное значение равно среднему по образцам"""
        rng = np.random.default_rng(9)
        decoder = VariationalDecoder(MlpSpec(2, 3, hidden_units=4), rng)
        states, embeddings = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        batch = mi_loss(decoder, states, embeddings).item()
        single = [mi_loss(decoder, states[i : i + 1], embeddings[i : i + 1]).item() for i in range(5)]
        self.assertAlmostEqual(batch, np.mean(single), places=12)

    def test_gradient_matches_finite_differences(self):
        """Градиент по omega на крошечном декодере"""
        rng = np.random.default_rng(10)
        decoder = VariationalDecoder(MlpSpec(1, 1, 1, 1), rng)
        states, embeddings = rng.normal(size=(4, 1)), rng.normal(size=(4, 1))
        error = check_gradients(
            lambda graph: mi_loss(decoder, states, embeddings, graph), decoder.group.params
        )
        self.assertLess(error, 1e-4)

    def test_training_decreases_on_linear_gaussian(self):
        """Обучение omega при фиксированных эмбеддингах монотонно снижает L_MI"""
        rng = np.random.default_rng(11)
        states = rng.normal(size=(256, 2))
        embeddings = states @ np.array([[1.0, 0.5], [-0.3, 2.0]]) + 0.1 * rng.normal(size=(256, 2))
        decoder = VariationalDecoder(MlpSpec(2, 2, hidden_units=8), rng)
        config = AdamConfig(learning_rate=1e-3)
        previous = np.inf
        for _ in range(100):
            graph = Graph()
            loss = mi_loss(decoder, states, embeddings, graph)
            self.assertLess(loss.item(), previous)
            previous = loss.item()
            graph.backward(loss)
            adam_step(decoder.group, config)

    def test_converges_to_conditional_entropy(self):
        """
        e = s + шум: оптимальный гауссов декодер даёт условную энтропию
        1/2 log(2 pi sigma^2) + 1/2, где sigma^2 - остаточная дисперсия
        линейной регрессии s на e. Обучение omega подходит к ней на 5%.
        """
        rng = np.random.default_rng(14)
        states = rng.normal(size=(1024, 1))
        embeddings = states + 0.5 * rng.normal(size=(1024, 1))
        design = np.hstack([embeddings, np.ones((1024, 1))])
        coef, *_ = np.linalg.lstsq(design, states, rcond=None)
        residual_var = float(np.mean((states - design @ coef) ** 2))
        optimum = 0.5 * np.log(2.0 * np.pi * residual_var) + 0.5

        decoder = VariationalDecoder(MlpSpec(1, 1, 1, 16), rng)
        config = AdamConfig(learning_rate=1e-2)
        for _ in range(3000):
            graph = Graph()
            loss = mi_loss(decoder, states, embeddings, graph)
            graph.backward(loss)
            adam_step(decoder.group, config)
        final = mi_loss(decoder, states, embeddings).item()
        self.assertLessEqual(abs(final - optimum), 0.05 * abs(optimum))


class KlRegularizerTests(TestCase):
    """Тесты KL-регуляризатора"""

    def test_identical(self):
        """Одинаковые распределения: 0"""
        mean, log_std = np.array([[0.3, -1.0]]), np.array([0.2, -0.1])
        self.assertAlmostEqual(kl_regularizer(mean, np.tile(log_std, (1, 1)), mean, log_std).item(), 0.0)

    def test_mean_shift(self):
        """mu = 1, mu_old = 0, sigma = 1: 0.5"""
        value = kl_regularizer(np.zeros(1), np.zeros(1), np.ones(1), np.zeros(1)).item()
        self.assertAlmostEqual(value, 0.5, places=12)

    def test_scale_change(self):
        """sigma = e, sigma_old = 1: (e^2 - 1) / 2 - 1"""
        value = kl_regularizer(np.zeros(1), np.zeros(1), np.zeros(1), np.ones(1)).item()
        self.assertAlmostEqual(value, 2.19453, places=5)

    def test_old_outputs_are_constants(self):
        """Выходы старой политики являются константами, градиент получает новая"""
        rng = np.random.default_rng(12)
        policy = GaussianPolicy(MlpSpec(1, 2, 1, 2), rng)
        policy.log_std.value[...] = [0.1, -0.2]
        states = rng.normal(size=(4, 1))
        old_mean, old_log_std = policy.forward(states)
        graph = Graph()
        mean, log_std = policy.forward(states, graph)
        shifted = ops.add(mean, np.array([0.5, -0.5]))
        graph.backward(kl_regularizer(old_mean, np.tile(old_log_std.data, (4, 1)), shifted, log_std))
        self.assertGreater(policy.group.grad_norm(), 0.0)

    def test_gradient_matches_finite_differences(self):
        """Градиент KL по новой политике"""
        rng = np.random.default_rng(13)
        policy = GaussianPolicy(MlpSpec(1, 1, 1, 2), rng)
        for param in policy.group.params:
            param.value[...] = rng.normal(size=param.value.shape)
        states = rng.normal(size=(5, 1))
        old_mean = rng.normal(size=(5, 1))
        old_log_std = rng.normal(scale=0.3, size=(5, 1))

        def loss_fn(graph):
            mean, log_std = policy.forward(states, graph)
            return kl_regularizer(old_mean, old_log_std, mean, log_std)

        self.assertLess(check_gradients(loss_fn, policy.group.params + [policy.log_std]), 1e-4)


class CoupledGradientTests(TestCase):
    """
    Градиенты каждой потери через связанную пару совпадают с центральными
    конечными разностями на 100 случайных крошечных архитектурах.
    """

    CASES = 100

    def _check(self, seed, make_loss):
        rng = np.random.default_rng(seed)
        for case in range(self.CASES):
            pair = random_pair(rng)
            size = int(rng.integers(2, 5))
            states = rng.normal(size=(size, pair.encoder.spec.input_dim))
            loss_fn, groups = make_loss(pair, states, rng)
            params = [param for group in groups for param in group.params]
            with self.subTest(case=case):
                self.assertLess(check_gradients(loss_fn, params), 1e-4)

    def test_policy_loss(self):
        """L_PPO по theta, log_std, phi и p~"""

        def make_loss(pair, states, rng):
            actions = rng.normal(size=(states.shape[0], pair.policy.spec.output_dim))
            old = gaussian_log_prob(*pair.policy_forward(states), actions).data
            batch = make_batch(
                rng.normal(size=states.shape[0]),
                log_probs=old + rng.normal(scale=0.3, size=states.shape[0]),
            )

            def loss_fn(graph):
                mean, log_std = pair.policy_forward(states, graph)
                return ppo_policy_loss(batch, gaussian_log_prob(mean, log_std, actions))

            return loss_fn, pair.policy.groups + [pair.encoder.group, pair.mixing.group]

        self._check(200, make_loss)

    def test_value_loss(self):
        """L_V по psi, phi и p~"""

        def make_loss(pair, states, rng):
            batch = make_batch(
                np.zeros(states.shape[0]), value_targets=rng.normal(size=states.shape[0])
            )

            def loss_fn(graph):
                return ppo_value_loss(batch, pair.value_forward(states, graph))

            return loss_fn, [pair.value.group, pair.encoder.group, pair.mixing.group]

        self._check(201, make_loss)

    def test_mi_loss(self):
        """L_MI по omega и phi"""

        def make_loss(pair, states, rng):
            decoder = VariationalDecoder(
                MlpSpec(pair.encoder.spec.output_dim, pair.encoder.spec.input_dim, 1, 3), rng
            )
            for param in decoder.group.params:
                param.value[...] = rng.normal(scale=0.3, size=param.value.shape)

            def loss_fn(graph):
                return mi_loss(decoder, states, pair.embed(states, graph), graph)

            return loss_fn, [decoder.group, pair.encoder.group]

        self._check(202, make_loss)

    def test_coupling_loss(self):
        """L_coupling по p~"""

        def make_loss(pair, states, rng):
            return (lambda graph: coupling_loss(pair.mixing, graph)), [pair.mixing.group]

        self._check(203, make_loss)

    def test_kl_regularizer(self):
        """L_KL по theta, log_std, phi и p~"""

        def make_loss(pair, states, rng):
            mean, log_std = pair.policy_forward(states)
            old_mean = mean.data + rng.normal(scale=0.3, size=mean.data.shape)
            old_log_std = log_std.data + rng.normal(scale=0.3, size=mean.data.shape)

            def loss_fn(graph):
                new_mean, new_log_std = pair.policy_forward(states, graph)
                return kl_regularizer(old_mean, old_log_std, new_mean, new_log_std)

            return loss_fn, pair.policy.groups + [pair.encoder.group, pair.mixing.group]

        self._check(204, make_loss)


class LossReportTests(TestCase):
    """Тесты отчёта о потерях"""

    def test_total_is_weighted_sum(self):
        """total = сумма слагаемых с весами"""
        report = LossReport(policy=1.0, value=2.0, mi=3.0, coupling=10.0, kl=4.0)
        self.assertAlmostEqual(report.total, 1.0 + 2.0 + 3.0 + 1e-3 * 10.0 + 0.5 * 4.0)
        report.weights["mi"] = 0.0
        self.assertAlmostEqual(report.total, 1.0 + 2.0 + 1e-2 + 2.0)

    def test_average(self):
        """Среднее по минибатчам"""
        reports = [
            LossReport(policy=1.0, probes={("policy", "encoder"): 2.0}),
            LossReport(policy=3.0, probes={("policy", "encoder"): 4.0}, p_policy=np.array([0.7])),
        ]
        merged = LossReport.average(reports)
        self.assertEqual(merged.policy, 2.0)
        self.assertEqual(merged.probes[("policy", "encoder")], 3.0)
        np.testing.assert_array_equal(merged.p_policy, [0.7])
