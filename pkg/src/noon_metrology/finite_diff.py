"""Finite-difference derivatives of (vector-valued) functions of one variable."""

from __future__ import annotations

from typing import Callable

import numpy as np


def central(f: Callable, x: float, h: float) -> np.ndarray:
    return (np.asarray(f(x + h)) - np.asarray(f(x - h))) / (2 * h)


def one_sided(f: Callable, x: float, h: float, direction: int = 1, f0=None) -> np.ndarray:
    """Second-order one-sided difference; ``direction`` is +1 (forward) or -1 (backward)."""
    if f0 is None:
        f0 = f(x)
    d = direction * h
    return (-3 * np.asarray(f0) + 4 * np.asarray(f(x + d)) - np.asarray(f(x + 2 * d))) / (2 * d)


def derivative(
    f: Callable,
    x: float,
    h: float,
    lo: float = -np.inf,
    hi: float = np.inf,
    richardson: bool = False,
    f0=None,
) -> np.ndarray:
    """Derivative of ``f`` at ``x`` restricted to the domain [lo, hi].

    Central differences in the interior, one-sided within ``h`` of a bound.
    With ``richardson`` the step-h and step-h/2 estimates are combined to
    cancel the leading O(h^2) error term.
    """
    if hi - lo < 4 * h:
        raise ValueError("domain too narrow for the requested step")

    def estimate(step):
        if x - step < lo:
            return one_sided(f, x, step, +1, f0)
        if x + step > hi:
            return one_sided(f, x, step, -1, f0)
        return central(f, x, step)

    d = estimate(h)
    if richardson:
        d = (4 * estimate(h / 2) - d) / 3
    return d


def ridders(f: Callable, x: float, h: float = 1e-2, ntab: int = 10, con: float = 1.4):
    """Ridders' polynomial extrapolation of central differences.

    Returns ``(derivative, error_estimate)``; works elementwise for array-valued ``f``.
    """
    con2 = con * con
    a = [[None] * ntab for _ in range(ntab)]
    a[0][0] = central(f, x, h)
    err = np.inf
    best = a[0][0]
    for i in range(1, ntab):
        h /= con
        a[0][i] = central(f, x, h)
        fac = con2
        for j in range(1, i + 1):
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1)
            fac *= con2
            errt = max(
                np.max(np.abs(a[j][i] - a[j - 1][i])),
                np.max(np.abs(a[j][i] - a[j - 1][i - 1])),
            )
            if errt <= err:
                err = errt
                best = a[j][i]
        if np.max(np.abs(a[i][i] - a[i - 1][i - 1])) >= 2 * err:
            break
    return best, err
