import logging
from dataclasses import dataclass

import numpy as np

from ndmath import ops
from ndmath.exceptions import ShapeError
from ndmath.models import Parameter, ParamGroup

from .distributions import diagonal_log_density
from .exceptions import ArchitectureError, DecoupledError

logger = logging.getLogger(__name__)

LOG_STD_BOUNDS = (-20.0, 2.0)
LOG_VAR_BOUNDS = (-10.0, 4.0)
# expit(30) < 1 в float64, поэтому p остаётся строго внутри (0, 1)
MIXING_LOGIT_BOUND = 30.0


def _leaf(graph, param):
    return param if graph is None else graph.param(param)


def _check_input(op, x, dim):
    x = ops.as_tensor(x)
    if x.data.ndim not in (1, 2) or x.data.shape[-1] != dim:
        raise ShapeError(op, x.data.shape, [dim])
    return x


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_layers: int = 2
    hidden_units: int = 64
    activation: str = "tanh"

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_units) < 1:
            raise ArchitectureError(f"Размерности сети должны быть >= 1: {self}")
        if self.hidden_layers < 1:
            raise ArchitectureError("Нужен хотя бы один скрытый слой")
        if self.activation != "tanh":
            raise ArchitectureError(f"Неподдерживаемая активация {self.activation!r}")

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_units": self.hidden_units,
            "activation": self.activation,
        }


def glorot(rng, fan_in, fan_out, gain=1.0):
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Mlp:
    """
    Полносвязная сеть: N скрытых слоёв tanh и линейный выход.
    Веса слоя хранятся как (in, out), смещения как (out,).
    """

    def __init__(self, spec, rng=None, output_gain=1.0, name="mlp"):
        self.spec = spec
        self.name = name
        rng = rng if rng is not None else np.random.default_rng(0)
        sizes = [spec.input_dim] + [spec.hidden_units] * spec.hidden_layers
        sizes.append(spec.output_dim)
        self.layers = []
        for j, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = output_gain if j == spec.hidden_layers else 1.0
            weight = Parameter(glorot(rng, fan_in, fan_out, gain), f"{name}.w{j}")
            bias = Parameter(np.zeros(fan_out), f"{name}.b{j}")
            self.layers.append((weight, bias))

    def parameters(self):
        return [p for layer in self.layers for p in layer]

    def linear(self, j, h, graph=None):
        """Предактивация слоя j: h @ W_j + b_j"""
        weight, bias = self.layers[j]
        return ops.add(ops.matmul(h, _leaf(graph, weight)), _leaf(graph, bias))

    def hidden(self, x, graph=None):
        """Активации всех скрытых слоёв"""
        h = _check_input(f"{self.name}-forward", x, self.spec.input_dim)
        activations = []
        for j in range(self.spec.hidden_layers):
            h = ops.tanh(self.linear(j, h, graph))
            activations.append(h)
        return activations

    def pre_activations(self, x, graph=None):
        """Предактивации z^j всех скрытых слоёв (поток без смешивания)"""
        h = _check_input(f"{self.name}-forward", x, self.spec.input_dim)
        zs = []
        for j in range(self.spec.hidden_layers):
            z = self.linear(j, h, graph)
            zs.append(z)
            h = ops.tanh(z)
        return zs

    def output(self, h, graph=None):
        return self.linear(self.spec.hidden_layers, h, graph)

    def forward(self, x, graph=None):
        return self.output(self.hidden(x, graph)[-1], graph)


class GaussianPolicy:
    """Диагональная гауссова политика с независимым от состояния log-std"""

    def __init__(self, spec, rng=None, name="policy", initial_log_std=-0.5):
        self.mean_net = Mlp(spec, rng, output_gain=0.01, name=name)
        self.log_std = Parameter(np.full(spec.output_dim, initial_log_std), "log_std")
        self.group = ParamGroup(name, self.mean_net.parameters())
        self.log_std_group = ParamGroup(
            "log_std" if name == "policy" else f"{name}_log_std", [self.log_std]
        )

    @property
    def spec(self):
        return self.mean_net.spec

    @property
    def groups(self):
        return [self.group, self.log_std_group]

    def clamped_log_std(self, graph=None):
        return ops.clip(_leaf(graph, self.log_std), *LOG_STD_BOUNDS)

    def forward(self, s, graph=None):
        """Решающий прямой проход: (mean, log_std)"""
        return self.mean_net.forward(s, graph), self.clamped_log_std(graph)

    def freeze(self):
        for group in self.groups:
            group.freeze()


class ValueNet:
    """V(s): скаляр на состояние"""

    def __init__(self, spec, rng=None, name="value"):
        if spec.output_dim != 1:
            raise ArchitectureError("У сети ценности выход размерности 1")
        self.net = Mlp(spec, rng, output_gain=1.0, name=name)
        self.group = ParamGroup(name, self.net.parameters())

    @property
    def spec(self):
        return self.net.spec

    @property
    def groups(self):
        return [self.group]

    def forward(self, s, graph=None):
        out = self.net.forward(s, graph)
        return ops.reshape(out, out.data.shape[:-1])

    def freeze(self):
        self.group.freeze()


class Encoder:
    """phi: пространство состояний цели -> пространство состояний источника"""

    def __init__(self, spec, rng=None):
        self.net = Mlp(spec, rng, output_gain=1.0, name="encoder")
        self.group = ParamGroup("encoder", self.net.parameters())

    @property
    def spec(self):
        return self.net.spec

    def forward(self, s, graph=None):
        return self.net.forward(s, graph)


class VariationalDecoder:
    """
    q_omega(s | e): диагональная гауссиана над состояниями цели.
    Общий ствол, голова среднего и голова лог-дисперсии.
    """

    def __init__(self, spec, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = Mlp(spec, rng, output_gain=1.0, name="decoder")
        self.log_var_weight = Parameter(
            glorot(rng, spec.hidden_units, spec.output_dim, gain=0.01),
            "decoder.log_var_w",
        )
        self.log_var_bias = Parameter(np.zeros(spec.output_dim), "decoder.log_var_b")
        self.group = ParamGroup(
            "decoder",
            self.net.parameters() + [self.log_var_weight, self.log_var_bias],
        )

    @property
    def spec(self):
        return self.net.spec

    def forward(self, e, graph=None):
        """(mean, log_var) для эмбеддинга e"""
        h = self.net.hidden(e, graph)[-1]
        mean = self.net.output(h, graph)
        raw = ops.add(
            ops.matmul(h, _leaf(graph, self.log_var_weight)),
            _leaf(graph, self.log_var_bias),
        )
        return mean, ops.clip(raw, *LOG_VAR_BOUNDS)

    def log_density(self, s_targ, e, graph=None):
        """log q_omega(s_targ | e) по каждому образцу"""
        s_targ = _check_input("decoder-log-density", s_targ, self.spec.output_dim)
        mean, log_var = self.forward(e, graph)
        return diagonal_log_density(s_targ, mean, log_var)


class MixingWeights:
    """
    Послойные веса смешивания p = sigmoid(p~) для пар политики и ценности.
    force() задаёт точные значения p (используется в проверках).
    """

    def __init__(self, policy_layers, value_layers, initial=0.0):
        self.policy_params = [
            Parameter(np.array([initial]), f"mixing.pi{j + 1}")
            for j in range(policy_layers)
        ]
        self.value_params = [
            Parameter(np.array([initial]), f"mixing.v{j + 1}")
            for j in range(value_layers)
        ]
        self.group = ParamGroup("mixing", self.policy_params + self.value_params)
        self.forced = None

    def force(self, policy=None, value=None):
        """Группа, для которой значения не переданы, остаётся обучаемой"""
        if policy is None and value is None:
            self.forced = None
            return
        self.forced = (
            self._forced_values(policy, self.policy_params),
            self._forced_values(value, self.value_params),
        )

    @staticmethod
    def _forced_values(values, params):
        if values is None:
            return None
        values = [float(p) for p in values]
        if len(values) != len(params):
            raise ArchitectureError("Число принудительных весов не совпадает с числом слоёв")
        return values

    def _realize(self, params, forced, graph):
        if forced is not None:
            return [ops.as_tensor(np.array([p])) for p in forced]
        bound = MIXING_LOGIT_BOUND
        return [ops.sigmoid(ops.clip(_leaf(graph, p), -bound, bound)) for p in params]

    def policy(self, graph=None):
        forced = None if self.forced is None else self.forced[0]
        return self._realize(self.policy_params, forced, graph)

    def value(self, graph=None):
        forced = None if self.forced is None else self.forced[1]
        return self._realize(self.value_params, forced, graph)

    def realized(self):
        """Численные значения p: (политика, ценность)"""
        return (
            np.array([p.item() for p in self.policy()]),
            np.array([p.item() for p in self.value()]),
        )


class CoupledNetworkPair:
    """
    Замороженный учитель (политика и ценность), обучаемый студент, энкодер phi
    и веса смешивания. Скрытый слой студента:
        h^j = tanh(p^j z^j + (1 - p^j) z'^j),
    где z'^j берётся из чистого потока учителя на phi(s). Выходной слой
    студента не смешивается.
    """

    def __init__(
        self, teacher_policy, teacher_value, policy, value, encoder, mixing
    ):
        self.teacher_policy = teacher_policy
        self.teacher_value = teacher_value
        self.policy = policy
        self.value = value
        self.encoder = encoder
        self.mixing = mixing
        self.coupled = True
        self._validate()
        teacher_policy.freeze()
        teacher_value.freeze()

    def _validate(self):
        source_dim = self.encoder.spec.output_dim
        target_dim = self.encoder.spec.input_dim
        pairs = (
            ("policy", self.teacher_policy.spec, self.policy.spec, self.mixing.policy_params),
            ("value", self.teacher_value.spec, self.value.spec, self.mixing.value_params),
        )
        for label, teacher, student, weights in pairs:
            if teacher.input_dim != source_dim:
                raise ArchitectureError(
                    f"{label}: вход учителя {teacher.input_dim} != выход энкодера {source_dim}"
                )
            if student.input_dim != target_dim:
                raise ArchitectureError(
                    f"{label}: вход студента {student.input_dim} != вход энкодера {target_dim}"
                )
            if teacher.hidden_layers != student.hidden_layers:
                raise ArchitectureError(
                    f"{label}: число скрытых слоёв учителя и студента различается "
                    f"({teacher.hidden_layers} и {student.hidden_layers})"
                )
            if teacher.hidden_units != student.hidden_units:
                raise ArchitectureError(
                    f"{label}: ширина скрытых слоёв учителя и студента различается"
                )
            if len(weights) != student.hidden_layers:
                raise ArchitectureError(f"{label}: число весов смешивания != числу слоёв")

    @classmethod
    def build(cls, teacher_policy, teacher_value, state_dim, action_dim, rng, **sizes):
        """Новый студент, энкодер и веса смешивания вокруг готового учителя"""
        hidden_layers = sizes.get("hidden_layers", teacher_policy.spec.hidden_layers)
        hidden_units = sizes.get("hidden_units", teacher_policy.spec.hidden_units)
        source_dim = teacher_policy.spec.input_dim
        policy = GaussianPolicy(
            MlpSpec(state_dim, action_dim, hidden_layers, hidden_units), rng
        )
        value = ValueNet(MlpSpec(state_dim, 1, hidden_layers, hidden_units), rng)
        encoder = Encoder(
            MlpSpec(
                state_dim,
                source_dim,
                sizes.get("encoder_layers", 2),
                sizes.get("encoder_units", 64),
            ),
            rng,
        )
        mixing = MixingWeights(hidden_layers, teacher_value.spec.hidden_layers)
        return cls(teacher_policy, teacher_value, policy, value, encoder, mixing)

    @property
    def teacher_groups(self):
        return self.teacher_policy.groups + self.teacher_value.groups

    @property
    def trainable_groups(self):
        return (
            self.policy.groups
            + self.value.groups
            + [self.encoder.group, self.mixing.group]
        )

    def embed(self, s, graph=None):
        return self.encoder.forward(s, graph)

    def _mixed_hidden(self, student, teacher, s, e, weights, graph):
        if not self.coupled:
            raise DecoupledError("Студент отсоединён от учителя")
        h = _check_input("coupled-forward", s, student.spec.input_dim)
        teacher_z = teacher.pre_activations(e, graph)
        student_h, teacher_h = [], []
        for j, (p, z_teacher) in enumerate(zip(weights, teacher_z)):
            z = student.linear(j, h, graph)
            mixed = ops.add(ops.mul(p, z), ops.mul(ops.scalar_affine(p, -1.0, 1.0), z_teacher))
            h = ops.tanh(mixed)
            student_h.append(h)
            teacher_h.append(ops.tanh(z_teacher))
        return student_h, teacher_h

    def policy_forward(self, s, graph=None, e=None):
        """(mean, log_std) студента с латеральными связями от учителя"""
        e = self.embed(s, graph) if e is None else e
        hidden, _ = self._mixed_hidden(
            self.policy.mean_net,
            self.teacher_policy.mean_net,
            s,
            e,
            self.mixing.policy(graph),
            graph,
        )
        mean = self.policy.mean_net.output(hidden[-1], graph)
        return mean, self.policy.clamped_log_std(graph)

    def value_forward(self, s, graph=None, e=None):
        e = self.embed(s, graph) if e is None else e
        hidden, _ = self._mixed_hidden(
            self.value.net,
            self.teacher_value.net,
            s,
            e,
            self.mixing.value(graph),
            graph,
        )
        out = self.value.net.output(hidden[-1], graph)
        return ops.reshape(out, out.data.shape[:-1])

    def hidden_activations(self, s, which="policy"):
        """Скрытые активации (студент со смешиванием, учитель) без записи графа"""
        if which == "policy":
            student, teacher = self.policy.mean_net, self.teacher_policy.mean_net
            weights = self.mixing.policy()
        else:
            student, teacher = self.value.net, self.teacher_value.net
            weights = self.mixing.value()
        return self._mixed_hidden(student, teacher, s, self.embed(s), weights, None)

    def decouple(self):
        """Студент становится независимым: дальше используется сольный проход"""
        self.coupled = False
        p_pi, p_v = self.mixing.realized()
        logger.info(
            f"Студент отсоединён от учителя: p_pi={np.round(p_pi, 4).tolist()}, "
            f"p_v={np.round(p_v, 4).tolist()}"
        )
        return self.policy, self.value
