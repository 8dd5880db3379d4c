"""
Примитивы прямого прохода. Каждая операция вычисляет значение и, если хотя бы
один вход записан в граф, регистрирует узел с функцией обратного прохода.

Поэлементные операции допускают только два вида трансляции:
скаляр (размер 1) против тензора и строку (n,) против матрицы (b, n).
"""

import numpy as np
from scipy.special import expit

from .exceptions import GraphError, ShapeError
from .models import Parameter, Tensor


def as_tensor(value):
    if isinstance(value, Tensor):
        return value
    if isinstance(value, Parameter):
        return Tensor(value.value)
    return Tensor(value)


def _graph_of(op, tensors):
    graph = None
    for tensor in tensors:
        if tensor.graph is None:
            continue
        if graph is not None and tensor.graph is not graph:
            raise GraphError(f"{op}: входы принадлежат разным графам")
        graph = tensor.graph
    return graph


def _emit(op, inputs, value, backward):
    graph = _graph_of(op, inputs)
    if graph is None:
        return Tensor(value)
    return graph.record(op, inputs, value, backward)


def _operands(op, a, b):
    """Значения входов, приведённые к допустимой трансляции"""
    x, y = a.data, b.data
    if x.shape == y.shape:
        return x, y
    if y.size == 1 and (x.size > 1 or x.ndim >= y.ndim):
        return x, y.reshape(())
    if x.size == 1:
        return x.reshape(()), y
    if x.ndim == 2 and y.ndim == 1 and y.shape[0] == x.shape[1]:
        return x, y
    if y.ndim == 2 and x.ndim == 1 and x.shape[0] == y.shape[1]:
        return x, y
    raise ShapeError(op, x.shape, y.shape)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    if int(np.prod(shape)) == 1:
        return np.full(shape, grad.sum())
    return grad.sum(axis=0).reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = _operands("add", a, b)

    def backward(grad):
        return _unbroadcast(grad, a.data.shape), _unbroadcast(grad, b.data.shape)

    return _emit("add", (a, b), x + y, backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = _operands("sub", a, b)

    def backward(grad):
        return _unbroadcast(grad, a.data.shape), _unbroadcast(-grad, b.data.shape)

    return _emit("sub", (a, b), x - y, backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = _operands("mul", a, b)

    def backward(grad):
        return (
            _unbroadcast(grad * y, a.data.shape),
            _unbroadcast(grad * x, b.data.shape),
        )

    return _emit("mul", (a, b), x * y, backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    x, y = a.data, b.data
    if x.ndim not in (1, 2) or y.ndim not in (1, 2) or x.ndim + y.ndim < 3:
        raise ShapeError("matmul", x.shape, y.shape)
    if x.shape[-1] != y.shape[0]:
        raise ShapeError("matmul", x.shape, y.shape)

    def backward(grad):
        if y.ndim == 1:
            return np.outer(grad, y), x.T @ grad
        if x.ndim == 1:
            return y @ grad, np.outer(x, grad)
        return grad @ y.T, x.T @ grad

    return _emit("matmul", (a, b), x @ y, backward)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(grad):
        return (grad * (1.0 - out * out),)

    return _emit("tanh", (a,), out, backward)


def sigmoid(a):
    a = as_tensor(a)
    out = expit(a.data)

    def backward(grad):
        return (grad * out * (1.0 - out),)

    return _emit("sigmoid", (a,), out, backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(grad):
        return (grad * out,)

    return _emit("exp", (a,), out, backward)


def log(a):
    a = as_tensor(a)
    x = a.data

    def backward(grad):
        return (grad / x,)

    return _emit("log", (a,), np.log(x), backward)


def square(a):
    a = as_tensor(a)
    x = a.data

    def backward(grad):
        return (2.0 * x * grad,)

    return _emit("square", (a,), x * x, backward)


def sum(a, axis=None):
    a = as_tensor(a)
    shape = a.data.shape

    def backward(grad):
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)

    return _emit("sum", (a,), np.sum(a.data, axis=axis), backward)


def mean(a, axis=None):
    a = as_tensor(a)
    shape = a.data.shape
    count = a.data.size if axis is None else shape[axis]

    def backward(grad):
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad / count, shape).copy(),)

    return _emit("mean", (a,), np.mean(a.data, axis=axis), backward)


def clip(a, lo, hi):
    """Градиент 1 внутри [lo, hi] и 0 снаружи"""
    a = as_tensor(a)
    x = a.data
    inside = (x >= lo) & (x <= hi)

    def backward(grad):
        return (grad * inside,)

    return _emit("clip", (a,), np.clip(x, lo, hi), backward)


def minimum(a, b):
    """Градиент идёт в меньший аргумент, при равенстве в первый"""
    a, b = as_tensor(a), as_tensor(b)
    x, y = _operands("minimum", a, b)
    first = x <= y

    def backward(grad):
        return (
            _unbroadcast(np.where(first, grad, 0.0), a.data.shape),
            _unbroadcast(np.where(first, 0.0, grad), b.data.shape),
        )

    return _emit("minimum", (a, b), np.where(first, x, y), backward)


def scalar_affine(a, scale, shift=0.0):
    """scale * a + shift для постоянных scale и shift"""
    a = as_tensor(a)

    def backward(grad):
        return (grad * scale,)

    return _emit("scalar_affine", (a,), scale * a.data + shift, backward)


def reshape(a, shape):
    a = as_tensor(a)
    original = a.data.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", original, shape) from None

    def backward(grad):
        return (grad.reshape(original),)

    return _emit("reshape", (a,), out, backward)
