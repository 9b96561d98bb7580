"""Unit system and electron-beam kinematics.

Everything in the package is expressed in eV (energies, and frequencies as
hbar*omega), nm (lengths) and nm^-1 (wave vectors).  Time is measured in
hbar/eV, so that hbar = 1 and a velocity v is carried as hbar*v in eV nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["UnitSystem", "UNITS", "BeamConfig", "beam_from_energy", "ParameterError"]


class ParameterError(ValueError):
    """Raised for invalid (non-physical or inconsistent) input parameters."""


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants in (eV, nm) units with hbar = 1."""

    e2: float = 1.43996  # eV nm (Gaussian e^2)
    hbar_c: float = 197.327  # eV nm
    me_c2: float = 510999.0  # eV
    amu_c2: float = 931.494e6  # eV

    @property
    def e(self) -> float:
        """Elementary charge, sqrt(eV nm)."""
        return math.sqrt(self.e2)

    @property
    def alpha(self) -> float:
        return self.e2 / self.hbar_c

    @property
    def electron_k_unit(self) -> float:
        """m_e c / hbar in nm^-1."""
        return self.me_c2 / self.hbar_c

    def mass_from_amu(self, mass_amu: float) -> float:
        """Mass in eV^-1 nm^-2 (hbar = 1 units) from atomic mass units."""
        return mass_amu * self.amu_c2 / self.hbar_c**2


UNITS = UnitSystem()


@dataclass(frozen=True)
class BeamConfig:
    """Monochromatic electron beam plus incidence/collection apertures.

    ``velocity`` is v/c; ``hbar_v`` is v in eV nm (hbar = 1).  ``k`` is the
    electron wavenumber used to convert half-angles into transverse wave
    vector cutoffs, ``q_max = k sin(phi)``.
    """

    kinetic_energy: float
    phi_i: float
    phi_f: float
    n_pixels_i: int
    n_pixels_f: int
    relativistic_k: bool = True
    units: UnitSystem = field(default=UNITS, repr=False)

    def __post_init__(self) -> None:
        if not self.kinetic_energy > 0:
            raise ParameterError(f"kinetic energy must be positive, got {self.kinetic_energy}")
        if not (self.phi_i > 0 and self.phi_f > 0):
            raise ParameterError("aperture half-angles must be positive")
        if self.n_pixels_i < 1 or self.n_pixels_f < 1:
            raise ParameterError("pixel counts must be >= 1")

    @property
    def gamma(self) -> float:
        return 1.0 + self.kinetic_energy / self.units.me_c2

    @property
    def velocity(self) -> float:
        g = self.gamma
        # 1 - 1/g^2 written to keep precision at low energies
        return math.sqrt((g - 1.0) * (g + 1.0)) / g

    @property
    def hbar_v(self) -> float:
        return self.velocity * self.units.hbar_c

    @property
    def k(self) -> float:
        """Electron wavenumber in nm^-1.

        Relativistic de Broglie value gamma*m*v/hbar by default; with
        ``relativistic_k=False`` the rest-mass value m*v/hbar.
        """
        kk = self.velocity * self.units.electron_k_unit
        return kk * self.gamma if self.relativistic_k else kk

    @property
    def q_max_i(self) -> float:
        return self.k * math.sin(self.phi_i)

    @property
    def q_max_f(self) -> float:
        return self.k * math.sin(self.phi_f)

    def q_longitudinal(self, omega: float) -> float:
        """omega/v in nm^-1 for an energy loss ``omega`` in eV."""
        return omega / self.hbar_v


def beam_from_energy(
    kinetic_energy: float,
    phi_i: float = 1e-3,
    phi_f: float = 1e-3,
    n_pixels_i: int = 1,
    n_pixels_f: int = 1,
    relativistic_k: bool = True,
) -> BeamConfig:
    """Build a :class:`BeamConfig` from the kinetic energy (eV) and half-angles (rad)."""
    return BeamConfig(
        kinetic_energy=float(kinetic_energy),
        phi_i=float(phi_i),
        phi_f=float(phi_f),
        n_pixels_i=int(n_pixels_i),
        n_pixels_f=int(n_pixels_f),
        relativistic_k=relativistic_k,
    )
