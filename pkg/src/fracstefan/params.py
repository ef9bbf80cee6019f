"""Physical parameter bundles shared by the closed forms, solver, and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["Material", "FracParams", "BoundaryData", "stefan_number",
           "LAMBDA_CONVENTIONS"]

# 'dimensional' uses lambda = sqrt(alpha * tau^(1-gamma)), the scale that makes
# x / (lambda * t^(gamma/2)) dimensionless under the governing equation.
# 'paper_printed' uses tau^((1-gamma)/2) * alpha^(gamma/2); the two coincide at
# gamma = 1 and whenever alpha = 1.
LAMBDA_CONVENTIONS = ("dimensional", "paper_printed")


@dataclass(frozen=True)
class Material:
    """Thermophysical constants of the liquid phase (SI units)."""

    rho: float   # density, kg/m^3
    c: float     # specific heat, J/(kg K)
    k: float     # conductivity, W/(m K)
    l: float     # latent heat, J/kg

    def __post_init__(self):
        for name in ("rho", "c", "k", "l"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"Material.{name} must be positive")

    @property
    def alpha(self) -> float:
        """Thermal diffusivity k / (rho * c), m^2/s."""
        return self.k / (self.rho * self.c)


@dataclass(frozen=True)
class FracParams:
    """Fractional order gamma in (0, 1] and relaxation time tau > 0 (s).

    At gamma = 1 the tau dependence vanishes (tau^(1-gamma) = 1) and every
    model degenerates to its classical counterpart.
    """

    gamma: float
    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def tau_factor(self) -> float:
        """tau^(1-gamma), the prefactor on every flux term."""
        return self.tau ** (1.0 - self.gamma)


@dataclass(frozen=True)
class BoundaryData:
    """Constant temperature u0 > 0 imposed at the fixed boundary x = 0 (K)."""

    u0: float

    def __post_init__(self):
        if not self.u0 > 0.0:
            raise ValueError(f"u0 must be positive, got {self.u0}")


def stefan_number(mat: Material, bc: BoundaryData) -> float:
    """Dimensionless ratio of sensible to latent heat, c*u0/l."""
    return mat.c * bc.u0 / mat.l
