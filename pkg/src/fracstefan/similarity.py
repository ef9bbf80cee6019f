"""Exact similarity solutions of the decoupled fractional melting model.

The decoupled model (fractional heat equation on the half line plus the
fractional interface condition) admits the closed form

    u(x,t) = u0 * (1 - (1 - W(-x/(lam t^(g/2)), -g/2, 1)) / (1 - W(-sigma, -g/2, 1)))
    s(t)   = sigma * lam * t^(g/2)

with sigma the positive root of a transcendental equation.  Substituting the
pair into the fractional interface condition (interface velocity term via the
Caputo power rule, gradient via the Wright derivative) gives

    F(sigma) = sigma * Gamma(1+g/2)/Gamma(1-g/2)
               - Ste * W(-sigma, -g/2, 1-g/2) / (1 - W(-sigma, -g/2, 1)) = 0,

where Ste = c*u0/l under the dimensional lambda convention (more generally
the coefficient is tau^(1-g) k u0 / (rho l lam^2)).  stefan_residual()
cross-checks any candidate sigma against the interface condition directly;
test code exercises it at the returned root.

At gamma = 1 everything collapses to the classical erf solution; the
independent classical solver (neumann_classical, built on scipy's erf) is the
cross-check oracle for that limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf as _sp_erf

from .fractional import caputo_power_rule
from .params import LAMBDA_CONVENTIONS, BoundaryData, FracParams, Material, stefan_number
from .special import wright, wright_prime

__all__ = [
    "SimilaritySolution",
    "BracketingError",
    "lambda_scale",
    "sigma_solve",
    "similarity_solution",
    "similarity_u",
    "similarity_dudt",
    "similarity_uxx",
    "similarity_s",
    "similarity_s_inverse",
    "stefan_residual",
    "neumann_classical",
]


class BracketingError(RuntimeError):
    """No sign change found while scanning for a root."""


@dataclass(frozen=True)
class SimilaritySolution:
    """Closed-form solution data: front coefficient, scale, order, boundary value."""

    sigma: float     # dimensionless front coefficient, > 0
    lam: float       # similarity scale, m / s^(gamma/2)
    gamma: float
    u0: float
    stefan: float    # c*u0/l

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


def lambda_scale(mat: Material, frac: FracParams,
                 convention: str = "dimensional") -> float:
    """Similarity scale lambda.

    'dimensional': sqrt(alpha * tau^(1-gamma)); 'paper_printed':
    tau^((1-gamma)/2) * alpha^(gamma/2).  Both coincide at gamma = 1 and at
    alpha = 1; the dimensional form is the default because only it renders
    x/(lambda t^(gamma/2)) dimensionless under the governing equation.
    """
    if convention not in LAMBDA_CONVENTIONS:
        raise ValueError(f"unknown lambda convention {convention!r}")
    if convention == "dimensional":
        return math.sqrt(mat.alpha * frac.tau_factor)
    return frac.tau ** ((1.0 - frac.gamma) / 2.0) * mat.alpha ** (frac.gamma / 2.0)


def _sigma_equation(g: float, ste_eff: float):
    gm_ratio = math.gamma(1.0 + g / 2.0) / math.gamma(1.0 - g / 2.0)

    def F(sigma: float) -> float:
        w1 = wright(-sigma, -g / 2.0, 1.0)
        wprime = wright(-sigma, -g / 2.0, 1.0 - g / 2.0)
        return sigma * gm_ratio - ste_eff * wprime / (1.0 - w1)

    return F


def sigma_solve(mat: Material, frac: FracParams, bc: BoundaryData,
                tol: float = 1e-12, convention: str = "dimensional") -> float:
    """Positive root of the transcendental front-coefficient equation.

    Brackets by doubling from a small positive sigma (F < 0 there, since the
    Wright ratio behaves like Ste/sigma), then refines with Brent's method
    and verifies |F(root)| <= tol.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    g = frac.gamma
    lam = lambda_scale(mat, frac, convention)
    ste_eff = frac.tau_factor * mat.k * bc.u0 / (mat.rho * mat.l * lam * lam)
    if not ste_eff > 0.0:
        raise ValueError("effective Stefan number must be positive")
    F = _sigma_equation(g, ste_eff)

    small = math.sqrt(ste_eff * math.gamma(1.0 - g / 2.0) / math.gamma(1.0 + g / 2.0))
    lo = 1e-8 * min(1.0, small)
    hi = max(1.0, small)
    cap = 8.0 * max(1.0, small)
    f_lo = F(lo)
    while F(hi) < 0.0:
        hi *= 2.0
        if hi > cap:
            raise BracketingError(
                f"no sign change of the sigma equation on ({lo:g}, {cap:g}]")
    if f_lo >= 0.0:
        raise BracketingError(f"sigma equation not negative at sigma={lo:g}")
    sigma = brentq(F, lo, hi, xtol=1e-15, rtol=8.9e-16)
    if abs(F(sigma)) > tol:
        raise BracketingError(
            f"root refinement stalled: |F({sigma:g})| = {abs(F(sigma)):g} > {tol:g}")
    return float(sigma)


def similarity_solution(mat: Material, frac: FracParams, bc: BoundaryData,
                        tol: float = 1e-12,
                        convention: str = "dimensional") -> SimilaritySolution:
    """Solve for sigma and bundle the full closed-form solution."""
    sigma = sigma_solve(mat, frac, bc, tol=tol, convention=convention)
    return SimilaritySolution(sigma=sigma,
                              lam=lambda_scale(mat, frac, convention),
                              gamma=frac.gamma, u0=bc.u0,
                              stefan=stefan_number(mat, bc))


def similarity_s(sol: SimilaritySolution, t):
    """Interface position s(t) = sigma * lambda * t^(gamma/2); s(0) = 0."""
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr < 0.0):
        raise ValueError("t must be nonnegative")
    out = sol.sigma * sol.lam * tarr ** (sol.gamma / 2.0)
    return float(out) if np.ndim(t) == 0 else out


def similarity_s_inverse(sol: SimilaritySolution, x):
    """Time at which the interface reaches x: (x/(sigma*lambda))^(2/gamma)."""
    xarr = np.asarray(x, dtype=float)
    if np.any(xarr < 0.0):
        raise ValueError("x must be nonnegative")
    out = (xarr / (sol.sigma * sol.lam)) ** (2.0 / sol.gamma)
    return float(out) if np.ndim(x) == 0 else out


def _wright_ratio(sol: SimilaritySolution, x, t, nu: float):
    z = -np.asarray(x, dtype=float) / (sol.lam * np.asarray(t, dtype=float) ** (sol.gamma / 2.0))
    return wright(z, -sol.gamma / 2.0, nu)


def similarity_u(sol: SimilaritySolution, x, t, clip: bool = True):
    """Temperature field of the closed-form solution.

    With clip=True (the physical field) the value is 0 for x >= s(t); with
    clip=False the analytic Wright form is continued across the interface,
    which is what residual diagnostics of the half-line equation need.
    Accepts scalar or broadcastable array x, t (t > 0).  Clipped evaluation
    only invokes the Wright series inside the liquid region, where its
    argument is bounded by sigma.
    """
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr <= 0.0):
        raise ValueError("t must be positive")
    xarr = np.asarray(x, dtype=float)
    denom = 1.0 - wright(-sol.sigma, -sol.gamma / 2.0, 1.0)
    if clip:
        xb, tb = np.broadcast_arrays(xarr, tarr)
        liquid = xb < similarity_s(sol, tb)
        u = np.zeros(xb.shape)
        if np.any(liquid):
            w = _wright_ratio(sol, xb[liquid], tb[liquid], 1.0)
            u[liquid] = sol.u0 * (1.0 - (1.0 - w) / denom)
    else:
        w = _wright_ratio(sol, xarr, tarr, 1.0)
        u = sol.u0 * (1.0 - (1.0 - w) / denom)
    return float(u) if (np.ndim(x) == 0 and np.ndim(t) == 0) else u


def similarity_dudt(sol: SimilaritySolution, x, t):
    """Time derivative of the (unclipped) closed form.

    du/dt = u0 * gamma * x * W'(z, -g/2, 1) * t^(-1-g/2) / (2 lam (1 - W(-sigma, -g/2, 1))),
    strictly positive for x, t > 0: the material only heats up.
    """
    g = sol.gamma
    denom = 1.0 - wright(-sol.sigma, -g / 2.0, 1.0)
    wp = _wright_ratio(sol, x, t, 1.0 - g / 2.0)   # W'(z,mu,1) = W(z,mu,1+mu)
    xarr = np.asarray(x, dtype=float)
    tarr = np.asarray(t, dtype=float)
    out = sol.u0 * g * xarr * wp * tarr ** (-1.0 - g / 2.0) / (2.0 * sol.lam * denom)
    return float(out) if (np.ndim(x) == 0 and np.ndim(t) == 0) else out


def similarity_uxx(sol: SimilaritySolution, x, t):
    """Second x-derivative of the (unclipped) closed form, via W'' = W(z, mu, 2mu+nu)."""
    g = sol.gamma
    denom = 1.0 - wright(-sol.sigma, -g / 2.0, 1.0)
    wpp = _wright_ratio(sol, x, t, 1.0 - g)
    tarr = np.asarray(t, dtype=float)
    out = sol.u0 * wpp / (denom * sol.lam ** 2 * tarr ** g)
    return float(out) if (np.ndim(x) == 0 and np.ndim(t) == 0) else out


def stefan_residual(sol: SimilaritySolution, mat: Material, frac: FracParams, t) -> float:
    """Relative residual of the fractional interface condition at time t.

    Left side rho*l*D^gamma s via the Caputo power rule; right side
    -tau^(1-gamma)*k*u_x(s(t)-, t) via the Wright derivative.  Vanishes at the
    true sigma; used as the independent consistency check on sigma_solve.
    """
    g = sol.gamma
    lhs = mat.rho * mat.l * sol.sigma * sol.lam * caputo_power_rule(g / 2.0, g, t)
    denom = 1.0 - wright(-sol.sigma, -g / 2.0, 1.0)
    wp = wright_prime(-sol.sigma, -g / 2.0, 1.0)
    ux = -sol.u0 * wp / (sol.lam * np.asarray(t, float) ** (g / 2.0) * denom)
    rhs = -frac.tau_factor * mat.k * ux
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def neumann_classical(mat: Material, bc: BoundaryData, tol: float = 1e-12) -> SimilaritySolution:
    """Classical (gamma=1) solution with sigma from the erf transcendental equation.

    Solves Ste = sqrt(pi) * (sigma/2) * exp(sigma^2/4) * erf(sigma/2) using
    scipy's erf, independently of the Wright series.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    ste = stefan_number(mat, bc)

    def G(sigma: float) -> float:
        half = 0.5 * sigma
        return math.sqrt(math.pi) * half * math.exp(half * half) * float(_sp_erf(half)) - ste

    lo, hi = 1e-8, max(1.0, math.sqrt(2.0 * ste))
    while G(hi) < 0.0:
        hi *= 2.0
        if hi > 64.0:
            raise BracketingError("classical sigma bracket exceeded sigma = 64")
    sigma = brentq(G, lo, hi, xtol=1e-15, rtol=8.9e-16)
    if abs(G(sigma)) > tol * max(1.0, ste):
        raise BracketingError(f"classical root refinement stalled at sigma={sigma:g}")
    return SimilaritySolution(sigma=float(sigma), lam=math.sqrt(mat.alpha),
                              gamma=1.0, u0=bc.u0, stefan=ste)
