"""Диагональные гауссовы плотности на примитивах ndmath"""

import numpy as np

from ndmath import ops

LOG_2PI = float(np.log(2.0 * np.pi))


def diagonal_log_density(x, mean, log_var):
    """log N(x; mean, diag(exp(log_var))), сумма по последней оси"""
    precision = ops.exp(ops.scalar_affine(log_var, -1.0))
    quad = ops.mul(ops.square(ops.sub(x, mean)), precision)
    terms = ops.add(quad, ops.scalar_affine(log_var, 1.0, LOG_2PI))
    return ops.scalar_affine(ops.sum(terms, axis=-1), -0.5)


def gaussian_log_prob(mean, log_std, action):
    """log N(a; mu, diag(exp(2 log_std)))"""
    return diagonal_log_density(action, mean, ops.scalar_affine(log_std, 2.0))


def sample_action(mean, log_std, rng):
    """mu + exp(log_std) * xi, xi ~ N(0, I) из потока rng"""
    mean = np.asarray(getattr(mean, "data", mean), dtype=np.float64)
    log_std = np.asarray(getattr(log_std, "data", log_std), dtype=np.float64)
    noise = rng.normal(size=mean.shape)
    return mean + np.exp(log_std) * noise
