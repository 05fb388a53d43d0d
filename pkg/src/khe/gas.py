"""Ideal-gas equation of state, variable conversions, and wave speeds.

All quantities are nondimensional. States are either scalars or numpy
arrays of matching shape; every function broadcasts elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonPhysicalState

__all__ = [
    "GasParams",
    "ConservedState",
    "PrimitiveState",
    "cons_to_prim",
    "prim_to_cons",
    "entropy",
    "entropy_from_pressure",
    "pressure_from_entropy",
    "internal_energy_density",
    "sound_speed",
    "max_wave_speeds",
]


@dataclass(frozen=True)
class GasParams:
    """Adiabatic exponent and derived constants (dim is fixed at 2)."""

    gamma: float = 1.4
    dim: int = 2

    def __post_init__(self):
        if not 1.0 < self.gamma <= 5.0 / 3.0:
            raise DomainError(f"gamma must lie in (1, 5/3], got {self.gamma}")
        if self.dim != 2:
            raise DomainError("only dim=2 is supported")

    @property
    def c_v(self) -> float:
        return 1.0 / (self.gamma - 1.0)

    @property
    def d1(self) -> float:
        """Lower trace-bound constant min{2, dim*(gamma-1)}."""
        return min(2.0, self.dim * (self.gamma - 1.0))

    @property
    def d2(self) -> float:
        """Upper trace-bound constant max{2, dim*(gamma-1)}."""
        return max(2.0, self.dim * (self.gamma - 1.0))

    @property
    def ratio_band(self) -> tuple[float, float]:
        """Admissible band [1/d2, 1/d1] for energy-defect / trace ratio."""
        return 1.0 / self.d2, 1.0 / self.d1


@dataclass(frozen=True)
class ConservedState:
    """Pointwise (rho, m_x, m_y, E)."""

    rho: float
    m_x: float
    m_y: float
    E: float


@dataclass(frozen=True)
class PrimitiveState:
    """Pointwise (rho, u, v, p)."""

    rho: float
    u: float
    v: float
    p: float


def _check_positive(name, value):
    if not np.all(np.asarray(value) > 0.0):
        bad = float(np.min(value))
        raise NonPhysicalState(f"{name} must stay positive (min {bad:g})")


def pressure(rho, m_x, m_y, E, g: GasParams):
    """Pressure from conserved variables: p = (gamma-1)(E - |m|^2/(2 rho))."""
    _check_positive("rho", rho)
    p = (g.gamma - 1.0) * (E - 0.5 * (m_x * m_x + m_y * m_y) / rho)
    _check_positive("pressure", p)
    return p


def cons_to_prim(rho, m_x, m_y, E, g: GasParams):
    """Conserved -> primitive (rho, u, v, p). Raises NonPhysicalState."""
    p = pressure(rho, m_x, m_y, E, g)
    return rho, m_x / rho, m_y / rho, p


def prim_to_cons(rho, u, v, p, g: GasParams):
    """Primitive -> conserved (rho, m_x, m_y, E). Raises NonPhysicalState."""
    _check_positive("rho", rho)
    _check_positive("pressure", p)
    E = p * g.c_v + 0.5 * rho * (u * u + v * v)
    return rho, rho * u, rho * v, E


def entropy_from_pressure(rho, p, g: GasParams):
    """Total entropy S = c_V rho ln(p / rho^gamma)."""
    _check_positive("rho", rho)
    _check_positive("pressure", p)
    return g.c_v * rho * np.log(p / rho**g.gamma)


def entropy(rho, m_x, m_y, E, g: GasParams):
    """Total entropy of a conserved state."""
    return entropy_from_pressure(rho, pressure(rho, m_x, m_y, E, g), g)


def pressure_from_entropy(rho, S, g: GasParams):
    """Invert the entropy relation at fixed density: p = rho^gamma exp(S/(c_V rho))."""
    if not np.all(np.asarray(rho) > 0.0):
        raise DomainError("rho must be positive")
    return rho**g.gamma * np.exp(S / (g.c_v * rho))


def internal_energy_density(rho, S, g: GasParams):
    """rho * e as a function of (rho, S); equals c_V p(rho, S)."""
    return g.c_v * pressure_from_entropy(rho, S, g)


def sound_speed(rho, p, g: GasParams):
    """c = sqrt(gamma p / rho)."""
    return np.sqrt(g.gamma * p / rho)


def max_wave_speeds(rho, m_x, m_y, E, g: GasParams) -> tuple[float, float]:
    """Directional bounds (max |u|+c, max |v|+c) over all nodes."""
    rho, u, v, p = cons_to_prim(rho, m_x, m_y, E, g)
    c = sound_speed(rho, p, g)
    return float(np.max(np.abs(u) + c)), float(np.max(np.abs(v) + c))
