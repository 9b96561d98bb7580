"""Shaped-electron-beam EELS: selective mode excitation and electron-sample entanglement.

Units throughout: energies in eV, lengths in nm, wave vectors in nm^-1,
hbar = 1 and Gaussian e^2 = 1.43996 eV nm.
"""

from .bem import Drude, NumericError, PlasmonModeSet, drude_dress, eigensolve, g_lorentzian, g_plasmon
from .grid import (
    ComplexField,
    PixelGrid,
    RealSpaceMap,
    ResolutionError,
    make_disk_grid,
    realspace_to_wavefunction,
    wavefunction_to_realspace,
)
from .mesh import MeshFormatError, SurfaceMesh, build_sphere_mesh, build_triangle_mesh, load_mesh, save_mesh
from .modes import (
    ModeBasis,
    PlasmonBasis,
    m_from_w,
    m_plasmon,
    mode_strength,
    plasmon_basis,
    sample_profiles,
    w_plasmon,
)
from .shaper import (
    DegenerateSystemError,
    DimensionError,
    Entangle,
    FinalState,
    FractionMatrix,
    SelectMode,
    TransferMatrixSampled,
    angle_integrated_loss,
    build_inversion_system,
    eels_map,
    eels_spectrum,
    forward_scatter,
    fraction_matrix,
    make_shaping_grids,
    solve_incident,
)
from .special import DomainError, bessel_k0, bessel_k1
from .units import UNITS, BeamConfig, ParameterError, beam_from_energy
from .vibrational import (
    IngestionError,
    VibrationalBasis,
    VibrationalModeSet,
    g_vibrational,
    load_vibrational,
    m_vibrational,
    surrogate_ring_molecule,
    w_vibrational,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
