"""Gamma and Wright functions on the parameter ranges the melting models need.

The Wright function

    W(z, mu, nu) = sum_{k>=0} z^k / (k! * Gamma(mu*k + nu)),   mu > -1,

is the subdiffusive analogue of the erf/erfc family: W(-x, -1/2, 1) = erfc(x/2)
and W(-x, -1/2, 1/2) = exp(-x^2/4)/sqrt(pi).  The melting models only evaluate
it at mu = -gamma/2 in (-1/2, 0] and nu in {1, 1 - gamma/2, 1 - gamma} with
z <= 0; accuracy outside those sub-ranges is not advertised.

For z < 0 the series alternates through the sign of Gamma(mu*k + nu), so terms
grow before they decay.  In double precision the alternating sum is reliable
for |z| up to roughly 30; all model evaluations keep |z| below about 10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GammaPoleError",
    "WrightConvergenceError",
    "WrightArgs",
    "gamma_fn",
    "rgamma",
    "wright",
    "wright_prime",
]

MAX_TERMS_DEFAULT = 500
DEFAULT_TOL = 1e-14


class GammaPoleError(ValueError):
    """Gamma evaluated at a nonpositive integer."""


class WrightConvergenceError(ArithmeticError):
    """Wright series terms did not decay within the configured term budget."""


@dataclass(frozen=True)
class WrightArgs:
    """Argument bundle (z, mu, nu) for the Wright function; requires mu > -1."""

    z: float
    mu: float
    nu: float

    def __post_init__(self):
        if not self.mu > -1.0:
            raise ValueError(f"Wright series requires mu > -1, got mu={self.mu}")


def gamma_fn(x: float) -> float:
    """Gamma(x), raising GammaPoleError at 0, -1, -2, ..."""
    if x <= 0.0 and x == math.floor(x):
        raise GammaPoleError(f"Gamma pole at x={x:g}")
    return math.gamma(x)


def _gamma_sign(x: float) -> float:
    # sign of Gamma on (-inf, 0): alternates between consecutive poles
    if x > 0.0:
        return 1.0
    return -1.0 if math.floor(x) % 2 else 1.0


def rgamma(x: float) -> float:
    """Reciprocal Gamma, 1/Gamma(x); entire, zero at nonpositive integers."""
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    try:
        g = math.gamma(x)
    except OverflowError:
        # |Gamma| too large to represent: reciprocal underflows
        return 0.0
    if g != 0.0 and math.isfinite(g):
        return 1.0 / g
    # Gamma underflowed (x very negative): go through logs
    try:
        return _gamma_sign(x) * math.exp(-math.lgamma(x))
    except OverflowError:
        return math.copysign(math.inf, _gamma_sign(x))


def wright(z, mu: float, nu: float, tol: float = DEFAULT_TOL,
           max_terms: int = MAX_TERMS_DEFAULT):
    """Evaluate W(z, mu, nu) by its power series.

    Accepts a scalar or ndarray z (mu, nu scalar).  Terms are accumulated as
    (z^k/k!) * rgamma(mu*k + nu); the k-th partial factor is carried
    recursively, with a log-space fallback once rgamma leaves double range.

    Truncation rule: a term counts as negligible when |term| < tol*|sum|;
    the sum stops after three consecutive negligible terms, and only once
    k > |z| (terms grow before they decay for alternating arguments).
    Raises WrightConvergenceError if max_terms is hit first.
    """
    if not mu > -1.0:
        raise ValueError(f"Wright series requires mu > -1, got mu={mu}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")

    zarr = np.asarray(z, dtype=float)
    scalar = zarr.ndim == 0
    zflat = np.atleast_1d(zarr)

    total = np.zeros_like(zflat)
    coeff = np.ones_like(zflat)          # z^k / k!
    streak = np.zeros(zflat.shape, dtype=np.int64)
    zmax = float(np.max(np.abs(zflat))) if zflat.size else 0.0
    with np.errstate(divide="ignore"):
        logabsz = np.where(zflat == 0.0, -np.inf, np.log(np.abs(zflat)))
    signz = np.where(zflat < 0.0, -1.0, 1.0)

    converged = False
    for k in range(max_terms):
        if k > 0:
            coeff = coeff * (zflat / k)
        g = mu * k + nu
        rg = rgamma(g)
        if math.isfinite(rg):
            term = coeff * rg
        elif g <= 0.0 and g == math.floor(g):
            term = np.zeros_like(zflat)
        else:
            # rgamma overflowed: assemble the term fully in log space
            expo = k * logabsz - math.lgamma(k + 1) - math.lgamma(g)
            term = _gamma_sign(g) * signz**k * np.exp(expo)
        total = total + term
        negligible = np.abs(term) <= tol * np.maximum(np.abs(total), 1e-300)
        streak = np.where(negligible, streak + 1, 0)
        if k > zmax and bool((streak >= 3).all()):
            converged = True
            break
    if not converged:
        raise WrightConvergenceError(
            f"Wright series not converged after {max_terms} terms "
            f"(mu={mu}, nu={nu}, max|z|={zmax:g})")
    return float(total[0]) if scalar else total.reshape(zarr.shape)


def wright_prime(z, mu: float, nu: float, tol: float = DEFAULT_TOL,
                 max_terms: int = MAX_TERMS_DEFAULT):
    """d/dz W(z, mu, nu), via the shift identity W'(z, mu, nu) = W(z, mu, mu + nu)."""
    return wright(z, mu, mu + nu, tol=tol, max_terms=max_terms)
