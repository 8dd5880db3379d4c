from unittest import TestCase

import numpy as np
from scipy.special import expit

from ndmath import ops
from ndmath.exceptions import ShapeError
from ndmath.gradcheck import check_gradients
from ndmath.models import Graph

from .distributions import diagonal_log_density, gaussian_log_prob, sample_action
from .exceptions import ArchitectureError, DecoupledError
from .models import (
    CoupledNetworkPair,
    Encoder,
    GaussianPolicy,
    MixingWeights,
    MlpSpec,
    ValueNet,
    VariationalDecoder,
)


def randomize(groups, rng, scale=0.5):
    for group in groups:
        for param in group.params:
            param.value[...] = rng.normal(scale=scale, size=param.value.shape)


def make_pair(seed=0, source_dim=3, target_dim=5, action_dim=2, layers=2, units=8):
    rng = np.random.default_rng(seed)
    teacher_policy = GaussianPolicy(
        MlpSpec(source_dim, 1, layers, units), rng, name="teacher_policy"
    )
    teacher_value = ValueNet(MlpSpec(source_dim, 1, layers, units), rng, name="teacher_value")
    randomize(teacher_policy.groups + teacher_value.groups, rng)
    pair = CoupledNetworkPair.build(
        teacher_policy,
        teacher_value,
        target_dim,
        action_dim,
        rng,
        encoder_units=units,
    )
    randomize([pair.policy.group, pair.value.group, pair.encoder.group], rng)
    return pair


class MlpSpecTests(TestCase):
    """Тесты описания сети"""

    def test_defaults(self):
        """По умолчанию два скрытых слоя по 64 нейрона tanh"""
        spec = MlpSpec(3, 1)
        self.assertEqual((spec.hidden_layers, spec.hidden_units), (2, 64))
        self.assertEqual(spec.activation, "tanh")

    def test_invalid(self):
        """Нулевые размерности и ноль слоёв запрещены"""
        with self.assertRaises(ArchitectureError):
            MlpSpec(0, 1)
        with self.assertRaises(ArchitectureError):
            MlpSpec(3, 1, hidden_layers=0)


class SoloForwardTests(TestCase):
    """Тесты сольного прямого прохода"""

    def test_zero_weights_zero_mean(self):
        """Нулевые веса дают нулевое среднее"""
        policy = GaussianPolicy(MlpSpec(4, 3))
        for param in policy.group.params:
            param.value[...] = 0.0
        mean, log_std = policy.forward(np.ones(4))
        np.testing.assert_array_equal(mean.data, np.zeros(3))
        np.testing.assert_array_equal(log_std.data, np.full(3, -0.5))

    def test_one_by_one_layers_compose_tanh(self):
        """Единичные слои 1x1 дают композицию tanh"""
        value = ValueNet(MlpSpec(1, 1, hidden_layers=2, hidden_units=1))
        for weight, bias in value.net.layers:
            weight.value[...] = 1.0
            bias.value[...] = 0.0
        out = value.forward(np.array([0.7]))
        self.assertAlmostEqual(out.item(), np.tanh(np.tanh(0.7)), places=15)

    def test_dimension_mismatch(self):
        """Неверная размерность состояния"""
        policy = GaussianPolicy(MlpSpec(4, 2))
        with self.assertRaises(ShapeError):
            policy.forward(np.ones(5))

    def test_log_std_clamped(self):
        """log-std ограничен отрезком [-20, 2]"""
        policy = GaussianPolicy(MlpSpec(2, 2))
        policy.log_std.value[...] = [-50.0, 7.0]
        _, log_std = policy.forward(np.zeros(2))
        np.testing.assert_array_equal(log_std.data, [-20.0, 2.0])

    def test_jacobian_matches_finite_differences(self):
        """Градиенты сольной политики совпадают с конечными разностями"""
        rng = np.random.default_rng(1)
        policy = GaussianPolicy(MlpSpec(3, 2, hidden_units=5), rng)
        randomize([policy.group], rng)
        states = rng.normal(size=(4, 3))
        actions = rng.normal(size=(4, 2))

        def loss_fn(graph):
            mean, log_std = policy.forward(states, graph)
            return ops.mean(gaussian_log_prob(mean, log_std, actions))

        error = check_gradients(loss_fn, policy.group.params + [policy.log_std])
        self.assertLess(error, 1e-4)


class DistributionTests(TestCase):
    """Тесты гауссовых плотностей"""

    def test_standard_normal_at_mode(self):
        """log N(0; 0, 1) = -0.5 log(2 pi)"""
        value = gaussian_log_prob(np.zeros(1), np.zeros(1), np.zeros(1)).item()
        self.assertAlmostEqual(value, -0.91894, places=5)

    def test_quadratic_term(self):
        """log N(1; 0, 1) = -0.91894 - 0.5"""
        value = gaussian_log_prob(np.zeros(1), np.zeros(1), np.ones(1)).item()
        self.assertAlmostEqual(value, -1.41894, places=5)

    def test_diagonal_factorization(self):
        """Двумерная плотность равна сумме одномерных"""
        mean, log_std, action = np.array([0.3, -1.0]), np.array([0.1, -0.4]), np.array([1.0, 0.5])
        joint = gaussian_log_prob(mean, log_std, action).item()
        parts = sum(
            gaussian_log_prob(mean[i : i + 1], log_std[i : i + 1], action[i : i + 1]).item()
            for i in range(2)
        )
        self.assertAlmostEqual(joint, parts, places=12)

    def test_density_integrates_to_one(self):
        """Интеграл exp(log-prob) по широкой сетке близок к 1"""
        grid = np.linspace(-10.0, 10.0, 20001)
        log_p = gaussian_log_prob(
            np.full((grid.size, 1), 0.4), np.array([0.3]), grid.reshape(-1, 1)
        ).data
        integral = np.sum(np.exp(log_p)) * (grid[1] - grid[0])
        self.assertAlmostEqual(integral, 1.0, delta=0.01)

    def test_sample_deterministic(self):
        """Один и тот же поток даёт одинаковые действия"""
        first = sample_action(np.zeros(3), np.zeros(3), np.random.default_rng(5))
        second = sample_action(np.zeros(3), np.zeros(3), np.random.default_rng(5))
        np.testing.assert_array_equal(first, second)

    def test_diagonal_density_matches_oracle(self):
        """Плотность совпадает с независимой формулой"""
        rng = np.random.default_rng(2)
        x, mean, log_var = rng.normal(size=(3, 4))
        expected = np.sum(
            -0.5 * np.log(2 * np.pi * np.exp(log_var)) - (x - mean) ** 2 / (2 * np.exp(log_var))
        )
        self.assertAlmostEqual(diagonal_log_density(x, mean, log_var).item(), expected, places=12)


class DecoderTests(TestCase):
    """Тесты вариационного декодера"""

    def _decoder(self, source_dim, target_dim):
        decoder = VariationalDecoder(MlpSpec(source_dim, target_dim, hidden_units=4))
        for param in decoder.group.params:
            param.value[...] = 0.0
        return decoder

    def test_zero_residual(self):
        """mean = s, log-var = 0, d = 2: log q = -log(2 pi)"""
        decoder = self._decoder(3, 2)
        s = np.array([0.4, -1.3])
        decoder.net.layers[-1][1].value[...] = s
        value = decoder.log_density(s, np.ones(3)).item()
        self.assertAlmostEqual(value, -1.83788, places=5)

    def test_unit_residual(self):
        """d = 1, mean = 0, s = 2: log q = -0.5 log(2 pi) - 2"""
        decoder = self._decoder(2, 1)
        value = decoder.log_density(np.array([2.0]), np.zeros(2)).item()
        self.assertAlmostEqual(value, -2.91894, places=5)

    def test_log_var_clamped(self):
        """Лог-дисперсия ограничена отрезком [-10, 4]"""
        decoder = self._decoder(2, 2)
        decoder.log_var_bias.value[...] = [-30.0, 30.0]
        _, log_var = decoder.forward(np.zeros(2))
        np.testing.assert_array_equal(log_var.data, [-10.0, 4.0])

    def test_dimension_mismatch(self):
        """Неверная размерность состояния цели"""
        decoder = self._decoder(2, 3)
        with self.assertRaises(ShapeError):
            decoder.log_density(np.zeros(2), np.zeros(2))


class MixingWeightsTests(TestCase):
    """Тесты весов смешивания"""

    def test_initial_half(self):
        """p~ = 0 даёт p = 0.5"""
        p_pi, p_v = MixingWeights(2, 3).realized()
        np.testing.assert_array_equal(p_pi, [0.5, 0.5])
        np.testing.assert_array_equal(p_v, [0.5, 0.5, 0.5])

    def test_open_interval(self):
        """p строго внутри (0, 1) при любых p~"""
        mixing = MixingWeights(2, 2)
        for param, logit in zip(mixing.group.params, [500.0, -500.0, 40.0, -40.0]):
            param.value[...] = logit
        for values in mixing.realized():
            self.assertTrue(np.all(values > 0.0))
            self.assertTrue(np.all(values < 1.0))

    def test_force_count_checked(self):
        """Число принудительных весов должно совпадать с числом слоёв"""
        with self.assertRaises(ArchitectureError):
            MixingWeights(2, 2).force(policy=[1.0], value=[1.0, 1.0])

    def test_force_one_group(self):
        """Принудительно заданы только веса политики, ценность остаётся обучаемой"""
        mixing = MixingWeights(1, 2)
        mixing.value_params[0].value[...] = 40.0
        mixing.force(policy=[1.0])
        p_pi, p_v = mixing.realized()
        np.testing.assert_array_equal(p_pi, [1.0])
        np.testing.assert_allclose(p_v, [expit(40.0), 0.5])
        mixing.force(value=[0.0, 0.25])
        p_pi, p_v = mixing.realized()
        np.testing.assert_array_equal(p_pi, [0.5])
        np.testing.assert_array_equal(p_v, [0.0, 0.25])
        with self.assertRaises(ArchitectureError):
            mixing.force(value=[1.0])


class CoupledForwardTests(TestCase):
    """Тесты совместного прохода учитель-студент"""

    def test_student_only_when_p_is_one(self):
        """p = 1: совместный проход совпадает с сольным студентом побитово"""
        for seed in range(100):
            pair = make_pair(seed=seed)
            pair.mixing.force(policy=[1.0, 1.0], value=[1.0, 1.0])
            s = np.random.default_rng(seed).normal(size=(3, 5))
            mean, _ = pair.policy_forward(s)
            solo_mean, _ = pair.policy.forward(s)
            np.testing.assert_array_equal(mean.data, solo_mean.data)
            np.testing.assert_array_equal(
                pair.value_forward(s).data, pair.value.forward(s).data
            )

    def test_teacher_hidden_when_p_is_zero(self):
        """p = 0: скрытые активации совпадают с учителем на phi(s) побитово"""
        for seed in range(100):
            pair = make_pair(seed=seed)
            pair.mixing.force(policy=[0.0, 0.0], value=[0.0, 0.0])
            s = np.random.default_rng(seed).normal(size=(3, 5))
            e = pair.embed(s)
            for which, teacher in (
                ("policy", pair.teacher_policy.mean_net),
                ("value", pair.teacher_value.net),
            ):
                student_h, _ = pair.hidden_activations(s, which)
                for mixed, solo in zip(student_h, teacher.hidden(e)):
                    np.testing.assert_array_equal(mixed.data, solo.data)

    def test_single_unit_half_mixing(self):
        """Один нейрон, p = 0.5, z = 2, z' = 0: h = tanh(1)"""
        rng = np.random.default_rng(0)
        teacher_policy = GaussianPolicy(MlpSpec(1, 1, 1, 1), rng, name="teacher_policy")
        teacher_value = ValueNet(MlpSpec(1, 1, 1, 1), rng, name="teacher_value")
        pair = CoupledNetworkPair.build(
            teacher_policy, teacher_value, 1, 1, rng, encoder_units=1
        )
        for group in pair.teacher_groups:
            for param in group.params:
                param.value[...] = 0.0
        weight, bias = pair.policy.mean_net.layers[0]
        weight.value[...] = 2.0
        bias.value[...] = 0.0
        student_h, _ = pair.hidden_activations(np.array([1.0]))
        self.assertAlmostEqual(student_h[0].item(), 0.76159, places=5)
        self.assertAlmostEqual(student_h[0].item(), np.tanh(1.0), places=15)

    def test_value_matches_hand_unrolled(self):
        """Смешанный проход ценности совпадает с ручной развёрткой"""
        pair = make_pair(seed=7)
        for param, logit in zip(pair.mixing.value_params, [0.3, -0.8]):
            param.value[...] = logit
        s = np.random.default_rng(7).normal(size=(4, 5))

        def dense(x, layer):
            weight, bias = layer
            return x @ weight.value + bias.value

        enc = pair.encoder.net.layers
        e = dense(np.tanh(dense(np.tanh(dense(s, enc[0])), enc[1])), enc[2])
        t = pair.teacher_value.net.layers
        z1_t = dense(e, t[0])
        z2_t = dense(np.tanh(z1_t), t[1])
        st = pair.value.net.layers
        p1, p2 = expit(0.3), expit(-0.8)
        h1 = np.tanh(p1 * dense(s, st[0]) + (1 - p1) * z1_t)
        h2 = np.tanh(p2 * dense(h1, st[1]) + (1 - p2) * z2_t)
        expected = dense(h2, st[2])[:, 0]
        np.testing.assert_allclose(pair.value_forward(s).data, expected, rtol=1e-12, atol=1e-12)

    def test_gradient_routing(self):
        """Учитель не получает градиент, энкодер получает при p < 1"""
        pair = make_pair(seed=3)
        fingerprints = [g.fingerprint() for g in pair.teacher_groups]
        s = np.random.default_rng(3).normal(size=(6, 5))
        graph = Graph()
        mean, _ = pair.policy_forward(s, graph)
        value = pair.value_forward(s, graph)
        loss = ops.add(ops.sum(ops.square(mean)), ops.sum(value))
        contributions = graph.backward(loss)
        for group in pair.teacher_groups:
            self.assertNotIn(group.name, contributions)
            for param in group.params:
                np.testing.assert_array_equal(param.grad, 0.0)
        self.assertGreater(pair.encoder.group.grad_norm(), 0.0)
        self.assertGreater(pair.mixing.group.grad_norm(), 0.0)
        self.assertEqual([g.fingerprint() for g in pair.teacher_groups], fingerprints)

    def test_coupled_gradients_match_finite_differences(self):
        """Градиенты по theta, phi и p~ совпадают с конечными разностями"""
        pair = make_pair(seed=11, units=4)
        s = np.random.default_rng(11).normal(size=(3, 5))
        actions = np.random.default_rng(12).normal(size=(3, 2))

        def loss_fn(graph):
            e = pair.embed(s, graph)
            mean, log_std = pair.policy_forward(s, graph, e=e)
            value = pair.value_forward(s, graph, e=e)
            log_prob = gaussian_log_prob(mean, log_std, actions)
            return ops.add(ops.mean(log_prob), ops.mean(ops.square(value)))

        params = [p for g in pair.trainable_groups for p in g.params]
        self.assertLess(check_gradients(loss_fn, params), 1e-4)

    def test_architecture_mismatch(self):
        """Несовпадение размерностей обнаруживается при построении"""
        rng = np.random.default_rng(0)
        teacher_policy = GaussianPolicy(MlpSpec(3, 1, 2, 8), rng, name="teacher_policy")
        teacher_value = ValueNet(MlpSpec(3, 1, 2, 8), rng, name="teacher_value")
        policy = GaussianPolicy(MlpSpec(5, 2, 2, 8), rng)
        value = ValueNet(MlpSpec(5, 1, 2, 8), rng)
        with self.assertRaises(ArchitectureError):
            CoupledNetworkPair(
                teacher_policy, teacher_value, policy, value,
                Encoder(MlpSpec(5, 4, 2, 8), rng), MixingWeights(2, 2),
            )
        with self.assertRaises(ArchitectureError):
            CoupledNetworkPair(
                teacher_policy, teacher_value,
                GaussianPolicy(MlpSpec(5, 2, 3, 8), rng), value,
                Encoder(MlpSpec(5, 3, 2, 8), rng), MixingWeights(3, 2),
            )


class DecoupleTests(TestCase):
    """Тесты отсоединения студента"""

    def test_large_logits_agree(self):
        """При p~ = 10 совместный и сольный проходы близки"""
        pair = make_pair(seed=4, units=16)
        for param in pair.mixing.group.params:
            param.value[...] = 10.0
        s = np.random.default_rng(4).normal(size=(8, 5))
        coupled_mean, _ = pair.policy_forward(s)
        coupled_value = pair.value_forward(s)
        policy, value = pair.decouple()
        np.testing.assert_allclose(policy.forward(s)[0].data, coupled_mean.data, atol=1e-3)
        np.testing.assert_allclose(value.forward(s).data, coupled_value.data, atol=1e-3)

    def test_exact_when_forced(self):
        """При p = 1 выходы совпадают побитово"""
        pair = make_pair(seed=5)
        pair.mixing.force(policy=[1.0, 1.0], value=[1.0, 1.0])
        s = np.random.default_rng(5).normal(size=(2, 5))
        coupled_mean, _ = pair.policy_forward(s)
        policy, _ = pair.decouple()
        np.testing.assert_array_equal(policy.forward(s)[0].data, coupled_mean.data)

    def test_decoupled_is_deterministic(self):
        """Отсоединённая политика детерминирована"""
        policy, _ = make_pair(seed=6).decouple()
        s = np.ones(5)
        first, second = policy.forward(s), policy.forward(s)
        np.testing.assert_array_equal(first[0].data, second[0].data)
        np.testing.assert_array_equal(first[1].data, second[1].data)

    def test_coupled_forward_after_decouple(self):
        """Совместный проход после отсоединения запрещён"""
        pair = make_pair(seed=8)
        pair.decouple()
        with self.assertRaises(DecoupledError):
            pair.policy_forward(np.zeros(5))
