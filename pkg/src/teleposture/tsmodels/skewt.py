"""Standardised Fernandez-Steel skewed Student-t.

``lam`` is the log of the Fernandez-Steel skew factor gamma, so ``lam = 0`` is
the symmetric t.  The density is rescaled to mean 0 and variance 1.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def moments(nu, lam):
    """(m, s): mean and standard deviation of the unstandardised skewed t."""
    g = math.exp(lam)
    m1 = 2.0 * math.sqrt(nu) * math.exp(math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0)) / (
        math.sqrt(math.pi) * (nu - 1.0)
    )
    m2 = nu / (nu - 2.0)
    mean = m1 * (g - 1.0 / g)
    var = m2 * (g * g + 1.0 / (g * g) - 1.0) - mean * mean
    return mean, math.sqrt(var)


@nb.njit(cache=True, nogil=True)
def _log_norm(nu, lam):
    g = math.exp(lam)
    m, s = moments(nu, lam)
    c = math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0) - 0.5 * math.log(nu * math.pi)
    return m, s, g, c + math.log(s) + math.log(2.0 / (g + 1.0 / g))


@nb.njit(cache=True, nogil=True)
def _logpdf_one(z, nu, m, s, g, const):
    x = m + s * z
    u = x / g if x >= 0.0 else x * g
    return const - 0.5 * (nu + 1.0) * math.log1p(u * u / nu)


@nb.njit(cache=True)
def _logpdf_array(z, nu, lam):
    m, s, g, const = _log_norm(nu, lam)
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _logpdf_one(z[i], nu, m, s, g, const)
    return out


def logpdf(z, nu: float, lam: float) -> np.ndarray:
    return _logpdf_array(np.atleast_1d(np.asarray(z, dtype=float)), float(nu), float(lam))


def pdf(z, nu: float, lam: float) -> np.ndarray:
    return np.exp(logpdf(z, nu, lam))


def sample(rng: np.random.Generator, size: int, nu: float, lam: float) -> np.ndarray:
    g = math.exp(lam)
    t = np.abs(rng.standard_t(nu, size))
    positive = rng.random(size) < g * g / (1.0 + g * g)
    x = np.where(positive, t * g, -t / g)
    m, s = moments(float(nu), float(lam))
    return (x - m) / s
