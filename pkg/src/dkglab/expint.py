"""Exponential-integrator coefficient functions.

``phi(k, z)`` evaluates ``phi_k(z) = sum_j z^j / (j+k)!`` elementwise for
complex ``z``. ``oscillator_c(k, z)`` evaluates the even series
``c_k(z) = sum_j (-z^2)^j / (2j+k)!`` that appears when ``phi_k`` is applied
to the harmonic-oscillator generator ``[[0, 1], [-w^2, 0]] * h`` with
``z = w h``:

    phi_k(A h) (p, q) = c_k(z) (p, q) + h c_{k+1}(z) (q, -w^2 p).

Small arguments use truncated Taylor series; larger ones use the closed
recurrences, which are well conditioned once ``|z| > 1``.
"""
from __future__ import annotations

from math import factorial

import numpy as np

_TAYLOR_TERMS = 24


def phi(k: int, z) -> np.ndarray:
    """``phi_k(z)`` for ``k >= 0``, with ``phi_0 = exp``."""
    z = np.asarray(z, dtype=complex)
    if k == 0:
        return np.exp(z)
    small = np.abs(z) <= 1.0
    out = np.empty_like(z)
    zs = np.where(small, z, 0)
    acc = np.zeros_like(z)
    for j in range(_TAYLOR_TERMS - 1, -1, -1):
        acc = acc * zs + 1.0 / factorial(j + k)
    out[small] = acc[small]
    if not np.all(small):
        zb = np.where(small, 1.0, z)
        val = np.exp(zb)
        for j in range(1, k + 1):
            val = (val - 1.0 / factorial(j - 1)) / zb
        out[~small] = val[~small]
    return out


def oscillator_c(k: int, z) -> np.ndarray:
    """``c_k(z)`` for real ``z >= 0``; ``c_0 = cos``, ``c_1 = sin z / z``."""
    z = np.asarray(z, dtype=float)
    if k == 0:
        return np.cos(z)
    small = z <= 1.0
    out = np.empty_like(z)
    w = -np.where(small, z, 0.0) ** 2
    acc = np.zeros_like(z)
    for j in range(_TAYLOR_TERMS - 1, -1, -1):
        acc = acc * w + 1.0 / factorial(2 * j + k)
    out[small] = acc[small]
    if not np.all(small):
        zb = np.where(small, 1.0, z)
        even, odd = np.cos(zb), np.sin(zb) / zb
        c = [even, odd]
        for j in range(2, k + 1):
            c.append((1.0 / factorial(j - 2) - c[j - 2]) / zb**2)
        out[~small] = c[k][~small]
    return out
