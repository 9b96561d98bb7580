"""Transverse wave-vector pixel grids and momentum <-> real-space rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import ParameterError

__all__ = [
    "PixelGrid",
    "ComplexField",
    "RealSpaceMap",
    "ResolutionError",
    "make_disk_grid",
    "disk_lattice_counts",
    "wavefunction_to_realspace",
    "realspace_to_wavefunction",
]

# relative slack so that lattice points lying exactly on the aperture edge count as inside
_EDGE_TOL = 1e-9


class ResolutionError(ValueError):
    """A sampling grid is too coarse for the wave vectors it must represent."""


@dataclass(frozen=True, eq=False)
class PixelGrid:
    """Square lattice of wave-vector pixels masked to the disk ``|Q| <= q_max``.

    ``index`` holds the integer lattice coordinates (ix, iy) of every pixel,
    so ``centers = pitch * index``.  Pixels are ordered row-major (iy outer,
    ix inner).
    """

    q_max: float
    pitch: float
    index: np.ndarray  # (n, 2) int

    def __post_init__(self) -> None:
        self.index.setflags(write=False)

    @property
    def centers(self) -> np.ndarray:
        return self.pitch * self.index.astype(float)

    @property
    def area(self) -> float:
        """Area of a single pixel (nm^-2)."""
        return self.pitch**2

    @property
    def n(self) -> int:
        return len(self.index)

    def __len__(self) -> int:
        return self.n

    @property
    def half_width(self) -> int:
        """Largest |ix| or |iy| present."""
        return int(np.abs(self.index).max()) if self.n else 0

    def same_as(self, other: PixelGrid) -> bool:
        return (
            self.pitch == other.pitch
            and self.q_max == other.q_max
            and np.array_equal(self.index, other.index)
        )

    def locate(self, q) -> int:
        """Index of the pixel whose center is nearest to the wave vector ``q``."""
        d = np.linalg.norm(self.centers - np.asarray(q, float), axis=1)
        return int(np.argmin(d))

    def refined(self, factor: int) -> PixelGrid:
        """Grid with ``factor`` times smaller pitch covering the same disk."""
        if factor < 1:
            raise ParameterError("refinement factor must be >= 1")
        pitch = self.pitch / factor
        return _lattice_in_disk(self.q_max, pitch)

    def describe(self) -> dict:
        return {"q_max": self.q_max, "pitch": self.pitch, "n_pixels": self.n}


def _lattice_in_disk(q_max: float, pitch: float) -> PixelGrid:
    kmax = int(math.floor(q_max / pitch * (1 + _EDGE_TOL)))
    ax = np.arange(-kmax, kmax + 1)
    iy, ix = np.meshgrid(ax, ax, indexing="ij")
    idx = np.stack([ix.ravel(), iy.ravel()], axis=1)
    r2 = (idx.astype(float) ** 2).sum(axis=1) * pitch**2
    keep = r2 <= q_max**2 * (1 + _EDGE_TOL)
    return PixelGrid(q_max=float(q_max), pitch=float(pitch), index=idx[keep])


def disk_lattice_counts(kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Squared lattice radii ``r2`` and the point counts ``N(r2)`` inside them."""
    ax = np.arange(-kmax, kmax + 1)
    r2 = (ax[:, None] ** 2 + ax[None, :] ** 2).ravel()
    r2 = r2[r2 <= kmax**2]
    values, counts = np.unique(r2, return_counts=True)
    return values, np.cumsum(counts)


def make_disk_grid(q_max: float, target_pixels: int) -> PixelGrid:
    """Pixelate the disk ``|Q| <= q_max`` with about ``target_pixels`` pixels.

    The pitch is ``q_max / sqrt(r2)`` where ``r2`` is the squared lattice
    radius whose disk count is closest to the target (smallest on ties).
    A single-pixel grid gets pitch ``sqrt(pi) q_max`` so its area matches
    the disk.
    """
    if not q_max > 0:
        raise ParameterError(f"q_max must be positive, got {q_max}")
    if int(target_pixels) < 1:
        raise ParameterError(f"target_pixels must be >= 1, got {target_pixels}")
    target_pixels = int(target_pixels)
    if target_pixels == 1:
        return PixelGrid(q_max=float(q_max), pitch=math.sqrt(math.pi) * q_max,
                         index=np.zeros((1, 2), dtype=int))
    kmax = int(math.ceil(math.sqrt(target_pixels / math.pi))) + 2
    r2, counts = disk_lattice_counts(kmax)
    best = int(np.argmin(np.abs(counts - target_pixels)))
    if r2[best] == 0:
        return PixelGrid(q_max=float(q_max), pitch=math.sqrt(math.pi) * q_max,
                         index=np.zeros((1, 2), dtype=int))
    pitch = q_max / math.sqrt(r2[best])
    return _lattice_in_disk(q_max, pitch)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude per pixel of a :class:`PixelGrid` (units of nm)."""

    grid: PixelGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has {v.shape} values for a grid of {self.grid.n} pixels")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm2(self) -> float:
        """Total probability sum |alpha|^2 dQ."""
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.area)

    def normalized(self) -> ComplexField:
        n2 = self.norm2()
        if n2 == 0:
            return self
        return ComplexField(self.grid, self.values / math.sqrt(n2))

    def as_lattice(self) -> np.ndarray:
        """Values placed on the full (2K+1)^2 lattice array indexed [iy, ix]."""
        k = self.grid.half_width
        out = np.zeros((2 * k + 1, 2 * k + 1), dtype=complex)
        ix, iy = self.grid.index.T
        out[iy + k, ix + k] = self.values
        return out


@dataclass(frozen=True, eq=False)
class RealSpaceMap:
    """Complex map on a square real-space grid, ``values[iy, ix]``."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else 0.0

    def integral(self, f=None) -> complex:
        v = self.values if f is None else f(self.values)
        return complex(np.sum(v) * self.spacing**2)


def _axis(extent: float, n: int) -> np.ndarray:
    return -extent / 2 + extent * np.arange(n) / n


def wavefunction_to_realspace(
    field: ComplexField,
    n_points: int | None = None,
    extent: float | None = None,
    oversample: int = 4,
) -> RealSpaceMap:
    """Render psi(R) = sum_Q alpha(Q) exp(iQ.R)/(2 pi) dQ on a square grid.

    The default extent is one real-space period 2 pi / pitch of the pixelated
    field, sampled ``oversample`` times finer than the Nyquist spacing
    pi / q_max.
    """
    grid = field.grid
    if extent is None:
        extent = 2 * math.pi / grid.pitch
    q_top = max(grid.half_width * grid.pitch, 1e-300)
    if n_points is None:
        n_points = max(int(math.ceil(extent * oversample * q_top / math.pi)), 1)
    dx = extent / n_points
    if grid.half_width > 0 and dx > math.pi / q_top * (1 + 1e-12):
        raise ResolutionError(
            f"real-space spacing {dx:.4g} nm exceeds the Nyquist limit {math.pi / q_top:.4g} nm"
        )
    x = _axis(extent, n_points)
    k = grid.half_width
    lat = field.as_lattice() * grid.area / (2 * math.pi)
    kk = np.arange(-k, k + 1) * grid.pitch
    e = np.exp(1j * np.outer(x, kk))
    values = e @ lat @ e.T
    return RealSpaceMap(x=x, y=x.copy(), values=values)


def realspace_to_wavefunction(psi: RealSpaceMap, grid: PixelGrid) -> ComplexField:
    """Project a real-space map back onto pixel coefficients.

    Exact inverse of :func:`wavefunction_to_realspace` when the map spans one
    real-space period of ``grid`` without aliasing.
    """
    dx = psi.spacing
    q = grid.centers
    ex = np.exp(-1j * np.outer(q[:, 0], psi.x))  # (n, nx)
    ey = np.exp(-1j * np.outer(q[:, 1], psi.y))  # (n, ny)
    vals = np.einsum("py,yx,px->p", ey, psi.values, ex, optimize=True)
    return ComplexField(grid, vals * dx**2 / (2 * math.pi))
