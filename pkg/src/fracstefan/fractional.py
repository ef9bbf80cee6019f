"""Discrete and closed-form fractional time operators on uniform grids.

Caputo derivatives of order gamma in (0,1) use the L1 scheme: piecewise-linear
reconstruction of f with the kernel (t-t')^(-gamma) integrated exactly per
cell, giving O(dt^(2-gamma)) accuracy for twice-differentiable f.  The
windowed variant starts the memory sum at an arbitrary grid level, which is
what the moving-lower-limit formulation of the coupled melting model needs
(window starts snap to grid indices).

The Riemann-Liouville operator covers delta in (-1,1): an integral for
delta < 0, a derivative (one-sided differencing of the order-(delta-1)
integral) for delta in (0,1), the identity at delta = 0.

Memory sums are evaluated by direct summation (numpy convolution); cost is
O(N^2) per series.  Fast history compression is a documented extension, not
implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeSeries",
    "caputo_l1",
    "caputo_l1_window",
    "rl_operator",
    "caputo_power_rule",
    "l1_weights",
]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real signal: values[j] = f(j*dt)."""

    values: np.ndarray
    dt: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("TimeSeries needs a 1-d array of at least 2 samples")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"fractional order must satisfy 0 < gamma < 1, got {gamma}")


def l1_weights(gamma: float, n: int) -> np.ndarray:
    """Unnormalized L1 kernel weights b[m] = (m+1)^(1-gamma) - m^(1-gamma), m < n."""
    m = np.arange(n, dtype=float)
    return (m + 1.0) ** (1.0 - gamma) - m ** (1.0 - gamma)


def caputo_l1(f: TimeSeries, gamma: float) -> np.ndarray:
    """L1 approximation of the Caputo derivative of order gamma at every level.

    Returns an array the size of f.values; entry 0 is 0 by convention (the
    derivative is only defined at levels n >= 1).
    """
    _check_gamma(gamma)
    vals = f.values
    n = vals.size - 1
    df = np.diff(vals)
    b = l1_weights(gamma, n)
    scale = f.dt ** (-gamma) / math.gamma(2.0 - gamma)
    out = np.zeros(n + 1)
    # out[m+1] = scale * sum_j b[m-j] df[j] : direct discrete convolution
    out[1:] = scale * np.convolve(df, b)[:n]
    return out


def caputo_l1_window(f: TimeSeries, start_index: int, gamma: float, n: int) -> float:
    """L1 sum of (1/Gamma(1-gamma)) * int_{t_start}^{t_n} (t_n-t')^(-gamma) f'(t') dt'.

    Same weights as caputo_l1, summation beginning at start_index; with
    start_index = 0 this reproduces caputo_l1 at level n exactly.
    """
    _check_gamma(gamma)
    last = f.values.size - 1
    if not (0 <= start_index < n <= last):
        raise ValueError(
            f"need 0 <= start_index < n <= {last}, got start_index={start_index}, n={n}")
    df = np.diff(f.values[start_index:n + 1])
    b = l1_weights(gamma, n - start_index)
    scale = f.dt ** (-gamma) / math.gamma(2.0 - gamma)
    return scale * float(np.dot(b[::-1], df))


def _rl_integral(vals: np.ndarray, dt: float, p: float) -> np.ndarray:
    # order-p fractional integral, p in (0,1): product rule with cell-averaged f
    # and the kernel (t-t')^(p-1) integrated exactly on each cell
    n = vals.size - 1
    favg = 0.5 * (vals[:-1] + vals[1:])
    m = np.arange(n, dtype=float)
    c = (m + 1.0) ** p - m ** p
    scale = dt ** p / math.gamma(p + 1.0)
    out = np.zeros(n + 1)
    out[1:] = scale * np.convolve(favg, c)[:n]
    return out


def rl_operator(f: TimeSeries, delta: float) -> np.ndarray:
    """Riemann-Liouville operator of order delta in (-1,1) at every level.

    delta in (-1,0): fractional integral of order -delta.
    delta = 0: identity.
    delta in (0,1): derivative branch, first-order one-sided differencing of
    the order-(delta-1) integral; entry 0 is 0 by convention.
    """
    if not -1.0 < delta < 1.0:
        raise ValueError(f"rl_operator requires -1 < delta < 1, got {delta}")
    if delta == 0.0:
        return f.values.copy()
    if delta < 0.0:
        return _rl_integral(f.values, f.dt, -delta)
    g = _rl_integral(f.values, f.dt, 1.0 - delta)
    out = np.zeros_like(g)
    out[1:] = np.diff(g) / f.dt
    return out


def caputo_power_rule(beta: float, gamma: float, t):
    """Closed form: Caputo derivative of t^beta is Gamma(beta+1)/Gamma(beta+1-gamma) * t^(beta-gamma).

    Requires beta > 0 (use 0 for constants) and 0 < gamma <= 1; gamma = 1
    gives the exact classical derivative beta * t^(beta-1).  t may be a
    scalar or an array of positive times.
    """
    if not beta > 0.0:
        raise ValueError(f"power rule requires beta > 0, got {beta}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"requires 0 < gamma <= 1, got {gamma}")
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr <= 0.0):
        raise ValueError("t must be positive")
    out = math.gamma(beta + 1.0) / math.gamma(beta + 1.0 - gamma) * tarr ** (beta - gamma)
    return float(out) if np.ndim(t) == 0 else out
