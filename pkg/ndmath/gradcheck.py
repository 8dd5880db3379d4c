"""Проверка аналитических градиентов центральными конечными разностями"""

import numpy as np

from .models import Graph


def numerical_gradient(loss_fn, param, h=1e-5):
    """loss_fn(graph) -> скалярный Tensor; значение параметра восстанавливается"""
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        plus = loss_fn(None).item()
        flat[i] = saved - h
        minus = loss_fn(None).item()
        flat[i] = saved
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def analytic_gradient(loss_fn, params):
    for param in params:
        param.grad.fill(0.0)
    graph = Graph()
    loss = loss_fn(graph)
    graph.backward(loss)
    grads = [param.grad.copy() for param in params]
    for param in params:
        param.grad.fill(0.0)
    return grads


def relative_error(analytic, numeric, floor=1e-4):
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def check_gradients(loss_fn, params, h=1e-5):
    """Максимальная относительная ошибка по всем параметрам"""
    worst = 0.0
    for param, grad in zip(params, analytic_gradient(loss_fn, params)):
        numeric = numerical_gradient(loss_fn, param, h=h)
        worst = max(worst, relative_error(grad, numeric))
    return worst
