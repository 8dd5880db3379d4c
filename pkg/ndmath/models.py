import hashlib
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import FrozenGroupError, GraphError, ShapeError


class Tensor:
    """
    Плотный массив float64, который может быть узлом графа вычислений.
    Тензор без графа является константой (прямой проход без записи).
    """

    __slots__ = ("data", "graph", "node_id")

    def __init__(self, data, graph=None, node_id=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.graph = graph
        self.node_id = node_id

    def __repr__(self):
        return f"Tensor(shape={self.shape}, node={self.node_id})"

    @property
    def shape(self):
        return list(self.data.shape)

    @property
    def size(self):
        return int(self.data.size)

    def item(self):
        if self.data.size != 1:
            raise ShapeError("item", self.data.shape)
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data


class Parameter:
    """Обучаемый (или замороженный) массив с буфером градиента"""

    __slots__ = ("name", "value", "grad", "group", "index")

    def __init__(self, value, name=""):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.group = None
        self.index = None

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={list(self.value.shape)})"

    @property
    def shape(self):
        return list(self.value.shape)


class ParamGroup:
    """
    Именованная группа параметров со своим состоянием Adam.
    Замороженная группа (учитель) не имеет моментов и не меняется после загрузки.
    """

    def __init__(self, name, params, trainable=True):
        self.name = name
        self.params = list(params)
        self.trainable = trainable
        self.step_count = 0
        for index, param in enumerate(self.params):
            param.group = self
            param.index = index
        self.moments = (
            [(np.zeros_like(p.value), np.zeros_like(p.value)) for p in self.params]
            if trainable
            else None
        )

    def __repr__(self):
        state = "trainable" if self.trainable else "frozen"
        return f"ParamGroup({self.name!r}, {len(self.params)} params, {state})"

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def freeze(self):
        self.trainable = False
        self.moments = None
        self.zero_grad()

    def zero_grad(self):
        for param in self.params:
            param.grad.fill(0.0)

    def values(self):
        """Копии значений всех параметров группы"""
        return [param.value.copy() for param in self.params]

    def load(self, arrays):
        if not self.trainable:
            raise FrozenGroupError(f"Группа {self.name!r} заморожена")
        arrays = list(arrays)
        if len(arrays) != len(self.params):
            raise ShapeError(
                f"load[{self.name}]", [len(self.params)], [len(arrays)]
            )
        for param, array in zip(self.params, arrays):
            array = np.asarray(array, dtype=np.float64)
            if array.shape != param.value.shape:
                raise ShapeError(f"load[{self.name}]", param.value.shape, array.shape)
            param.value[...] = array

    def grad_norm(self):
        return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in self.params)))

    def fingerprint(self):
        """sha256 от форм и байтов всех параметров"""
        digest = hashlib.sha256()
        for param in self.params:
            digest.update(str(param.value.shape).encode())
            digest.update(np.ascontiguousarray(param.value).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate должен быть положительным")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 и beta2 должны лежать в [0, 1)")


@dataclass
class Node:
    op: str
    inputs: tuple
    shape: tuple
    backward: Optional[Callable] = None
    param: Optional[Parameter] = None


class Graph:
    """
    Лента обратного режима: узлы записываются в порядке вычисления,
    поэтому входы всегда предшествуют узлу. Граф живёт один минибатч.
    """

    def __init__(self):
        self.nodes = []
        self._leaves = {}

    def __len__(self):
        return len(self.nodes)

    def param(self, parameter):
        """Лист графа для параметра (один узел на параметр)"""
        leaf = self._leaves.get(id(parameter))
        if leaf is None:
            node_id = len(self.nodes)
            self.nodes.append(
                Node("param", (), parameter.value.shape, param=parameter)
            )
            leaf = Tensor(parameter.value, graph=self, node_id=node_id)
            self._leaves[id(parameter)] = leaf
        return leaf

    def record(self, op, inputs, value, backward):
        node_id = len(self.nodes)
        input_ids = tuple(
            t.node_id if t.graph is self else None for t in inputs
        )
        value = np.asarray(value, dtype=np.float64)
        self.nodes.append(Node(op, input_ids, value.shape, backward))
        return Tensor(value, graph=self, node_id=node_id)

    def backward(self, loss, groups=None):
        """
        Накапливает dLoss/dParam в буферы градиентов обучаемых параметров.

        groups ограничивает приём градиента перечисленными группами
        (имена или объекты ParamGroup); None означает все обучаемые группы.
        Возвращает вклад этого прохода: {имя группы: [градиенты по параметрам]}.
        """
        if not self.nodes:
            raise GraphError("backward: граф пуст")
        if loss.graph is not self or loss.node_id is None:
            raise GraphError("backward: loss не принадлежит этому графу")
        if loss.data.size != 1:
            raise GraphError(
                f"backward: ожидался скаляр, получена форма {loss.shape}"
            )

        allowed = None
        if groups is not None:
            allowed = {g if isinstance(g, str) else g.name for g in groups}

        last = loss.node_id
        needs = [False] * (last + 1)
        for i in range(last + 1):
            node = self.nodes[i]
            if node.param is not None:
                group = node.param.group
                needs[i] = (
                    group is not None
                    and group.trainable
                    and (allowed is None or group.name in allowed)
                )
            else:
                needs[i] = any(j is not None and needs[j] for j in node.inputs)

        contributions = {}
        if not needs[last]:
            return contributions

        adjoints = {last: np.ones_like(loss.data)}
        for i in range(last, -1, -1):
            grad = adjoints.pop(i, None)
            if grad is None:
                continue
            node = self.nodes[i]
            if node.param is not None:
                param = node.param
                param.grad += grad
                per_group = contributions.setdefault(
                    param.group.name,
                    [np.zeros_like(p.value) for p in param.group.params],
                )
                per_group[param.index] = per_group[param.index] + grad
                continue
            for j, input_grad in zip(node.inputs, node.backward(grad)):
                if j is None or input_grad is None or not needs[j]:
                    continue
                if j in adjoints:
                    adjoints[j] = adjoints[j] + input_grad
                else:
                    adjoints[j] = input_grad
        return contributions
