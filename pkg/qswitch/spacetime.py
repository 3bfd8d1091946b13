"""Weak-field Schwarzschild kinematics for static observers."""

import math
from dataclasses import dataclass, field
from typing import Self

from qswitch.constants import PhysicalConstants
from qswitch.error import DomainError

EARTH_MASS = 5.9722e24
EARTH_RADIUS = 6.371e6
SMALL_MASS = 1e-10
SMALL_MASS_RADIUS = 1e-15


def _schwarzschild_radius(mass: float, constants: PhysicalConstants) -> float:
    if not mass > 0.0:
        err = f"mass must be positive, got {mass}"
        raise DomainError(err)
    return 2.0 * constants.G * mass / constants.c**2


@dataclass(frozen=True)
class CentralBody:
    mass: float
    radius: float
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self: Self) -> None:
        if not self.radius > 0.0:
            err = f"radius must be positive, got {self.radius}"
            raise DomainError(err)
        rs = _schwarzschild_radius(self.mass, self.constants)
        if not rs < self.radius:
            err = f"body is inside its Schwarzschild radius (R_S={rs} m >= R={self.radius} m)"
            raise DomainError(err)

    @classmethod
    def earth(cls: type[Self], constants: PhysicalConstants | None = None) -> Self:
        return cls(mass=EARTH_MASS, radius=EARTH_RADIUS, constants=constants or PhysicalConstants())

    @classmethod
    def small_mass(cls: type[Self], constants: PhysicalConstants | None = None) -> Self:
        return cls(mass=SMALL_MASS, radius=SMALL_MASS_RADIUS, constants=constants or PhysicalConstants())

    @property
    def gm(self: Self) -> float:
        return self.constants.G * self.mass

    @property
    def schwarzschild_radius(self: Self) -> float:
        return _schwarzschild_radius(self.mass, self.constants)

    @property
    def surface_gravity(self: Self) -> float:
        return self.gm / self.radius**2

    @property
    def curvature_r0101(self: Self) -> float:
        return -self.constants.c**2 * self.schwarzschild_radius / self.radius**3


def schwarzschild_radius(body: CentralBody) -> float:
    return body.schwarzschild_radius


def _check_exterior(r: float, body: CentralBody) -> None:
    if not r > body.schwarzschild_radius:
        err = f"radius {r} m is not outside the Schwarzschild radius {body.schwarzschild_radius} m"
        raise DomainError(err)


def dilation_factor(r: float, body: CentralBody) -> float:
    """dτ/dt = sqrt(1 - R_S/r) for a static clock at radius r."""
    _check_exterior(r, body)
    return math.sqrt(1.0 - body.schwarzschild_radius / r)


def dilation_difference(r_hi: float, r_lo: float, body: CentralBody) -> float:
    """dilation_factor(r_hi) - dilation_factor(r_lo) without subtracting nearly equal square roots.

    Uses sqrt(1-a) - sqrt(1-b) = (b - a) / (sqrt(1-a) + sqrt(1-b)) with b - a = R_S (r_hi - r_lo) / (r_lo r_hi).
    """
    _check_exterior(r_lo, body)
    if r_hi < r_lo:
        err = f"expected r_hi >= r_lo, got r_hi={r_hi} m, r_lo={r_lo} m"
        raise DomainError(err)
    if r_hi == r_lo:
        return 0.0
    rs = body.schwarzschild_radius
    gap = rs / r_lo if math.isinf(r_hi) else rs * ((r_hi - r_lo) / (r_lo * r_hi))
    return gap / (dilation_factor(r_hi, body) + dilation_factor(r_lo, body))


def gravitational_potential(r: float, body: CentralBody) -> float:
    if not r > 0.0:
        err = f"radius must be positive, got {r}"
        raise DomainError(err)
    return -body.gm / r


def dilated_hamiltonian_factor(r: float, body: CentralBody) -> float:
    # first-order counterpart of dilation_factor: H = (1 + Φ/c²) H_int
    _check_exterior(r, body)
    return 1.0 + gravitational_potential(r, body) / body.constants.c**2
