from unittest import TestCase

import numpy as np

from . import ops
from .exceptions import FrozenGroupError, GraphError, ShapeError
from .gradcheck import analytic_gradient, check_gradients
from .models import AdamConfig, Graph, Parameter, ParamGroup, Tensor
from .optim import adam_step


def make_group(*arrays, name="w"):
    params = [Parameter(a, name=f"{name}{i}") for i, a in enumerate(arrays)]
    return ParamGroup(name, params), params


class ForwardOpsTests(TestCase):
    """Тесты прямого прохода примитивов"""

    def test_tanh_at_origin(self):
        """tanh(0) = 0"""
        self.assertEqual(ops.tanh([0.0]).data.tolist(), [0.0])

    def test_clip_value(self):
        """clip([1.5], 0.8, 1.2) = [1.2]"""
        self.assertEqual(ops.clip([1.5], 0.8, 1.2).data.tolist(), [1.2])

    def test_matmul_identity(self):
        """I3 @ x = x"""
        x = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(ops.matmul(np.eye(3), x).data, x)

    def test_matmul_shape_error_names_op(self):
        """Несовпадение внутренних размерностей"""
        with self.assertRaises(ShapeError) as ctx:
            ops.matmul(np.ones((2, 3)), np.ones((4, 2)))
        self.assertIn("matmul", str(ctx.exception))
        self.assertIn("[2, 3]", str(ctx.exception))
        self.assertIn("[4, 2]", str(ctx.exception))

    def test_elementwise_broadcast_rules(self):
        """Допустимы скаляр и строка, остальное запрещено"""
        m = np.ones((3, 2))
        self.assertEqual(ops.add(m, [5.0]).shape, [3, 2])
        self.assertEqual(ops.mul(m, [1.0, 2.0]).shape, [3, 2])
        with self.assertRaises(ShapeError):
            ops.add(m, np.ones(3))
        with self.assertRaises(ShapeError):
            ops.mul(np.ones((3, 2)), np.ones((2, 3)))

    def test_minimum_and_affine(self):
        """minimum и scalar_affine по определению"""
        np.testing.assert_array_equal(
            ops.minimum([1.0, 5.0], [2.0, 3.0]).data, [1.0, 3.0]
        )
        np.testing.assert_array_equal(
            ops.scalar_affine([1.0, 2.0], -2.0, 1.0).data, [-1.0, -3.0]
        )

    def test_no_graph_no_recording(self):
        """Без графа результат является константой"""
        out = ops.tanh(ops.matmul(np.ones((2, 2)), np.ones(2)))
        self.assertIsNone(out.graph)
        self.assertIsNone(out.node_id)


class BackwardTests(TestCase):
    """Тесты обратного прохода"""

    def test_square_sum_gradient(self):
        """d(sum w^2)/dw = 2w"""
        group, (w,) = make_group(np.array([1.0, 2.0]))
        graph = Graph()
        graph.backward(ops.sum(ops.square(graph.param(w))))
        np.testing.assert_allclose(w.grad, [2.0, 4.0])

    def test_mean_gradient(self):
        """d(mean w)/dw = 1/n"""
        group, (w,) = make_group(np.arange(4.0))
        graph = Graph()
        graph.backward(ops.mean(graph.param(w)))
        np.testing.assert_allclose(w.grad, [0.25] * 4)

    def test_clip_gradient_zero_outside(self):
        """Градиент clip равен нулю вне интервала"""
        group, (w,) = make_group(np.array([0.5, 1.0, 1.5]))
        graph = Graph()
        graph.backward(ops.sum(ops.clip(graph.param(w), 0.8, 1.2)))
        np.testing.assert_array_equal(w.grad, [0.0, 1.0, 0.0])

    def test_minimum_gradient_ties_to_first(self):
        """При равенстве градиент min уходит в первый аргумент"""
        _, (a,) = make_group(np.array([1.0, 2.0, 3.0]), name="a")
        _, (b,) = make_group(np.array([1.0, 1.0, 4.0]), name="b")
        graph = Graph()
        graph.backward(ops.sum(ops.minimum(graph.param(a), graph.param(b))))
        np.testing.assert_array_equal(a.grad, [1.0, 0.0, 1.0])
        np.testing.assert_array_equal(b.grad, [0.0, 1.0, 0.0])

    def test_non_scalar_loss_rejected(self):
        """Нескалярный loss запрещён"""
        _, (w,) = make_group(np.ones(3))
        graph = Graph()
        with self.assertRaises(GraphError):
            graph.backward(ops.square(graph.param(w)))

    def test_empty_graph_rejected(self):
        """backward на пустом графе"""
        with self.assertRaises(GraphError):
            Graph().backward(Tensor([1.0]))

    def test_mixing_graphs_rejected(self):
        """Тензоры разных графов нельзя смешивать"""
        _, (w,) = make_group(np.ones(2))
        first, second = Graph(), Graph()
        with self.assertRaises(GraphError):
            ops.add(first.param(w), second.param(w))

    def test_frozen_group_receives_nothing(self):
        """Замороженная группа не получает градиент"""
        _, (w,) = make_group(np.array([1.0, -1.0]), name="student")
        teacher, (t,) = make_group(np.array([2.0, 3.0]), name="teacher")
        teacher.freeze()
        graph = Graph()
        loss = ops.sum(ops.mul(graph.param(w), graph.param(t)))
        contributions = graph.backward(loss)
        np.testing.assert_array_equal(t.grad, [0.0, 0.0])
        np.testing.assert_allclose(w.grad, [2.0, 3.0])
        self.assertNotIn("teacher", contributions)

    def test_group_mask(self):
        """Маска групп ограничивает получателей градиента"""
        _, (a,) = make_group(np.array([1.0]), name="a")
        _, (b,) = make_group(np.array([2.0]), name="b")
        graph = Graph()
        loss = ops.sum(ops.mul(graph.param(a), graph.param(b)))
        contributions = graph.backward(loss, groups=["b"])
        np.testing.assert_array_equal(a.grad, [0.0])
        np.testing.assert_array_equal(b.grad, [1.0])
        self.assertEqual(set(contributions), {"b"})

    def test_repeated_backward_accumulates(self):
        """Повторный проход по тому же графу накапливает градиент"""
        _, (w,) = make_group(np.array([3.0]))
        graph = Graph()
        loss = ops.sum(ops.square(graph.param(w)))
        graph.backward(loss)
        graph.backward(loss)
        np.testing.assert_allclose(w.grad, [12.0])

    def test_backward_is_linear(self):
        """grad(a*L1 + b*L2) = a*grad(L1) + b*grad(L2)"""
        rng = np.random.default_rng(3)
        _, (w,) = make_group(rng.normal(size=(3, 2)))
        x = rng.normal(size=(4, 3))

        def first(graph):
            p = w if graph is None else graph.param(w)
            return ops.mean(ops.tanh(ops.matmul(x, p)))

        def second(graph):
            p = w if graph is None else graph.param(w)
            return ops.sum(ops.square(ops.matmul(x, p)))

        def combined(graph):
            return ops.add(
                ops.scalar_affine(first(graph), 2.5),
                ops.scalar_affine(second(graph), -0.5),
            )

        (g1,) = analytic_gradient(first, [w])
        (g2,) = analytic_gradient(second, [w])
        (g,) = analytic_gradient(combined, [w])
        np.testing.assert_allclose(g, 2.5 * g1 - 0.5 * g2, rtol=1e-12, atol=1e-12)


class FiniteDifferenceTests(TestCase):
    """Сравнение с центральными конечными разностями на случайных графах"""

    UNARY = ["tanh", "sigmoid", "exp", "square", "log_abs", "clip"]

    def _unary(self, name, t):
        if name == "log_abs":
            return ops.log(ops.scalar_affine(ops.square(t), 1.0, 0.5))
        if name == "clip":
            return ops.clip(t, -0.7, 0.7)
        return getattr(ops, name)(t)

    def test_random_composites(self):
        """100 случайных композиций примитивов"""
        rng = np.random.default_rng(0)
        for case in range(100):
            rows, inner, cols = rng.integers(1, 4, size=3)
            _, (w, b) = make_group(
                rng.normal(size=(inner, cols)), rng.normal(size=cols)
            )
            _, (s,) = make_group(rng.normal(size=1), name="s")
            x = rng.normal(size=(rows, inner))
            first = self.UNARY[case % len(self.UNARY)]
            second = self.UNARY[(case // len(self.UNARY)) % len(self.UNARY)]
            other = rng.normal(size=(rows, cols))

            def loss_fn(graph, first=first, second=second, x=x, other=other):
                def leaf(p):
                    return p if graph is None else graph.param(p)

                z = ops.add(ops.matmul(x, leaf(w)), leaf(b))
                h = self._unary(first, z)
                h = ops.mul(leaf(s), h)
                h = ops.minimum(h, ops.scalar_affine(other, 0.5, 0.1))
                h = self._unary(second, ops.sub(h, ops.scalar_affine(z, 0.3)))
                return ops.add(ops.mean(h), ops.sum(ops.mean(h, axis=0)))

            error = check_gradients(loss_fn, [w, b, s])
            self.assertLess(error, 1e-4, msg=f"case {case}: {first}/{second}")


class AdamTests(TestCase):
    """Тесты оптимизатора Adam"""

    def test_first_step_closed_form(self):
        """Первый шаг при g=1 сдвигает параметр на -lr"""
        group, (w,) = make_group(np.array([0.0]))
        w.grad[:] = 1.0
        adam_step(group, AdamConfig(learning_rate=3e-4))
        np.testing.assert_allclose(w.value, [-3e-4], rtol=1e-6)
        self.assertEqual(group.step_count, 1)
        np.testing.assert_array_equal(w.grad, [0.0])

    def test_zero_gradient_is_noop(self):
        """Нулевой градиент не меняет параметры, но счётчик растёт"""
        group, (w,) = make_group(np.array([1.5, -2.0]))
        before = w.value.copy()
        for _ in range(3):
            adam_step(group)
        np.testing.assert_array_equal(w.value, before)
        self.assertEqual(group.step_count, 3)

    def test_descends_quadratic(self):
        """100 шагов на f = theta^2 монотонно уменьшают |theta|"""
        group, (w,) = make_group(np.array([1.0]))
        config = AdamConfig()
        previous = abs(w.value[0])
        for _ in range(100):
            graph = Graph()
            graph.backward(ops.sum(ops.square(graph.param(w))))
            adam_step(group, config)
            current = abs(w.value[0])
            self.assertLess(current, previous)
            previous = current

    def test_frozen_group_rejected(self):
        """Adam на замороженной группе запрещён"""
        group, _ = make_group(np.ones(2))
        group.freeze()
        with self.assertRaises(FrozenGroupError):
            adam_step(group)

    def test_frozen_group_bitwise_stable(self):
        """Замороженная группа не меняется за много шагов обучения"""
        student, (w,) = make_group(np.array([0.5, 0.5]), name="student")
        teacher, (t,) = make_group(np.array([1.0, -1.0]), name="teacher")
        teacher.freeze()
        before = teacher.fingerprint()
        for _ in range(20):
            graph = Graph()
            loss = ops.sum(ops.square(ops.mul(graph.param(w), graph.param(t))))
            graph.backward(loss)
            adam_step(student)
        self.assertEqual(teacher.fingerprint(), before)

    def test_invalid_config(self):
        """Недопустимые гиперпараметры Adam"""
        with self.assertRaises(ValueError):
            AdamConfig(learning_rate=0.0)
        with self.assertRaises(ValueError):
            AdamConfig(beta1=1.0)
