"""Vibrational mode sets: file ingestion, charge models and the mode basis.

Mode n of a molecule or flake moves atom l along ``e_nl / sqrt(M_l)``.  The
beam couples to the charge rearrangement it produces, described either by a
point effective charge per atom (the default surrogate) or by a gridded
vector field rho_l(r), the charge response to a unit displacement of atom
l.  For a point charge rho_l = -q_l grad delta(r - r_l).

Units: energies in eV internally (files use meV), lengths in nm, masses in
amu on input, charges in units of e.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special as sp

from .modes import ModeBasis, kernel_ft
from .units import UNITS, ParameterError

__all__ = [
    "IngestionError",
    "GriddedCharge",
    "VibrationalModeSet",
    "VibrationalBasis",
    "g_vibrational",
    "w_vibrational",
    "m_vibrational",
    "load_vibrational",
    "save_vibrational",
    "read_charge_grid",
    "write_charge_grid",
    "surrogate_ring_molecule",
]

log = logging.getLogger(__name__)

ORTHO_TOL_FILE = 1e-4
ORTHO_TOL = 1e-6


class IngestionError(ValueError):
    """Malformed or physically invalid vibrational input."""


@dataclass(frozen=True, eq=False)
class GriddedCharge:
    """Charge-response fields rho_l(r) on a regular grid, shape (n_atoms, 3, nx, ny, nz).

    Values are charge densities per unit displacement (e nm^-4); voxel
    (i, j, k) sits at ``origin + spacing * (i, j, k)``.
    """

    origin: np.ndarray
    spacing: float
    values: np.ndarray

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.values.shape[2:]
        return tuple(self.origin[k] + self.spacing * np.arange(n[k]) for k in range(3))


def write_charge_grid(grid: GriddedCharge, path) -> None:
    """Binary layout: 4 little-endian int64 (n_atoms, nx, ny, nz), 4 float64
    (origin x, y, z, spacing), then the values as little-endian float64 in C order."""
    v = np.ascontiguousarray(grid.values, dtype="<f8")
    head = np.array([v.shape[0], *v.shape[2:]], dtype="<i8")
    meta = np.array([*grid.origin, grid.spacing], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(meta.tobytes())
        fh.write(v.tobytes())


def read_charge_grid(path, n_atoms: int | None = None) -> GriddedCharge:
    raw = Path(path).read_bytes()
    if len(raw) < 64:
        raise IngestionError(f"{path}: charge grid file too short")
    head = np.frombuffer(raw[:32], dtype="<i8")
    meta = np.frombuffer(raw[32:64], dtype="<f8")
    shape = (int(head[0]), 3, int(head[1]), int(head[2]), int(head[3]))
    if min(shape) < 1:
        raise IngestionError(f"{path}: invalid grid shape {shape}")
    if n_atoms is not None and shape[0] != n_atoms:
        raise IngestionError(f"{path}: grid holds {shape[0]} atoms, expected {n_atoms}")
    count = int(np.prod(shape))
    if len(raw) != 64 + 8 * count:
        raise IngestionError(f"{path}: expected {64 + 8 * count} bytes, found {len(raw)}")
    values = np.frombuffer(raw[64:], dtype="<f8").reshape(shape).astype(float)
    if not meta[3] > 0:
        raise IngestionError(f"{path}: grid spacing must be positive")
    return GriddedCharge(origin=meta[:3].astype(float), spacing=float(meta[3]), values=values)


@dataclass(frozen=True, eq=False)
class VibrationalModeSet:
    """Harmonic modes with a charge model.

    ``vectors[n, l]`` is the normalised 3-vector e_nl of mode n on atom l.
    """

    elements: tuple[str, ...]
    masses: np.ndarray  # amu
    positions: np.ndarray  # (L, 3) nm
    omega: np.ndarray  # (n,) eV
    vectors: np.ndarray  # (n, L, 3)
    charges: np.ndarray | None = None  # (L,) e
    grid: GriddedCharge | None = None
    gamma: float = 1e-3  # eV
    delta: float = 0.02  # nm

    def __post_init__(self) -> None:
        if np.any(~(np.asarray(self.masses) > 0)):
            raise ParameterError("atomic masses must be positive")
        if np.any(~(np.asarray(self.omega) > 0)):
            raise ParameterError("mode energies must be positive")
        if not self.gamma > 0 or not self.delta > 0:
            raise ParameterError("damping and regularisation length must be positive")
        n, L = len(self.omega), len(self.masses)
        if self.vectors.shape != (n, L, 3) or self.positions.shape != (L, 3):
            raise ParameterError("inconsistent atom or mode array shapes")
        if self.charges is None and self.grid is None:
            raise ParameterError("a charge model (point charges or grid) is required")
        gram = self.overlap()
        if np.abs(gram - np.eye(n)).max() > ORTHO_TOL:
            raise ParameterError("mode vectors are not orthonormal")

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    @property
    def n_atoms(self) -> int:
        return len(self.masses)

    @property
    def weight(self) -> np.ndarray:
        """G_n = pi omega_n / 2."""
        return 0.5 * math.pi * self.omega

    def overlap(self) -> np.ndarray:
        flat = self.vectors.reshape(self.n_modes, -1)
        return flat @ flat.T

    def select(self, idx) -> VibrationalModeSet:
        idx = np.asarray(idx, dtype=int)
        return VibrationalModeSet(
            self.elements, self.masses, self.positions, self.omega[idx], self.vectors[idx],
            self.charges, self.grid, self.gamma, self.delta,
        )


def g_vibrational(modes: VibrationalModeSet, omega) -> np.ndarray:
    """Im{omega_n^2 / (omega_n^2 - omega (omega + i gamma))}, shape (..., n_modes)."""
    w = np.asarray(omega, dtype=float)[..., None]
    wn2 = modes.omega**2
    return np.imag(wn2 / (wn2 - w * (w + 1j * modes.gamma)))


# ------------------------------------------------------------------ basis


@dataclass(frozen=True, eq=False)
class VibrationalBasis(ModeBasis):
    """Vibrational modes seen by a beam of speed ``hbar_v`` (eV nm).

    ``charge_model`` picks the point-charge surrogate (``"point"``) or the
    gridded charge response (``"grid"``).
    """

    modes: VibrationalModeSet
    hbar_v: float
    charge_model: str = "point"

    kind = "vibrational"

    def __post_init__(self) -> None:
        if self.charge_model not in ("point", "grid"):
            raise ParameterError(f"unknown charge model {self.charge_model!r}")
        if self.charge_model == "point" and self.modes.charges is None:
            raise ParameterError("point-charge model requested but no effective charges given")
        if self.charge_model == "grid" and self.modes.grid is None:
            raise ParameterError("gridded charge model requested but no grid attached")

    @property
    def labels(self) -> list[str]:
        return [f"vib{k + 1}" for k in range(self.n_modes)]

    @property
    def omega(self) -> np.ndarray:
        return self.modes.omega

    @property
    def gamma(self) -> np.ndarray:
        return np.full(self.n_modes, self.modes.gamma)

    @property
    def weight(self) -> np.ndarray:
        return self.modes.weight

    def g(self, omega) -> np.ndarray:
        return g_vibrational(self.modes, omega)

    def select(self, idx) -> VibrationalBasis:
        return VibrationalBasis(self.modes.select(idx), self.hbar_v, self.charge_model)

    def extent(self):
        r = self.modes.positions[:, :2]
        centre = r.mean(axis=0)
        return centre, float(np.max(np.linalg.norm(r - centre, axis=1)))

    # mode-resolved displacement weights e_nl q_l / sqrt(M_l)
    def _dipoles(self) -> np.ndarray:
        m = UNITS.mass_from_amu(self.modes.masses)
        return self.modes.vectors * (self.modes.charges / np.sqrt(m))[None, :, None]

    def _planar_density(self) -> tuple[np.ndarray, np.ndarray, float]:
        """sum_l e_nl.rho_l / sqrt(M_l) integrated along z with exp(i q_n z).

        Returns voxel-column centres (V, 2), densities (V, n_modes) per area and
        the column area.
        """
        g = self.modes.grid
        m = UNITS.mass_from_amu(self.modes.masses)
        x, y, z = g.axes
        rho = np.einsum("nlc,lcxyz->nxyz", self.modes.vectors / np.sqrt(m)[None, :, None], g.values)
        phase = np.exp(1j * np.outer(self.q_long, z))  # (n, nz)
        col = np.einsum("nxyz,nz->xyn", rho, phase) * g.spacing
        xx, yy = np.meshgrid(x, y, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        return pts, col.reshape(-1, self.n_modes), g.spacing**2

    def profile(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.charge_model == "grid":
            return self._profile_grid(pts)
        return self._profile_point(pts)

    def _profile_point(self, pts: np.ndarray) -> np.ndarray:
        d = self._dipoles()  # (n, L, 3)
        pos = self.modes.positions
        delta2 = self.modes.delta**2
        out = np.zeros((len(pts), self.n_modes), dtype=complex)
        for n, qn in enumerate(self.q_long):
            rel = pos[None, :, :2] - pts[:, None, :]  # R_l - R, (P, L, 2)
            rho = np.sqrt((rel**2).sum(-1) + delta2)
            phase = np.exp(1j * qn * pos[:, 2])[None, :]
            trans = -qn * sp.k1(qn * rho) / rho * (rel * d[n][None, :, :2]).sum(-1)
            longi = 1j * qn * sp.k0(qn * rho) * d[n][None, :, 2]
            out[:, n] = (2 * UNITS.e / self.omega[n]) * ((trans + longi) * phase).sum(1)
        return out

    def _profile_grid(self, pts: np.ndarray) -> np.ndarray:
        src, dens, area = self._planar_density()
        delta2 = self.modes.delta**2
        out = np.zeros((len(pts), self.n_modes), dtype=complex)
        for start in range(0, len(pts), 512):
            p = pts[start:start + 512]
            r = np.sqrt(((p[:, None, :] - src[None]) ** 2).sum(-1) + delta2)
            for n, qn in enumerate(self.q_long):
                out[start:start + len(p), n] = sp.k0(qn * r) @ dens[:, n]
        return out * (2 * UNITS.e / self.omega) * area

    def transfer(self, q) -> np.ndarray:
        qv = np.atleast_2d(np.asarray(q, dtype=float))
        q2 = (qv**2).sum(1)
        out = np.empty((len(qv), self.n_modes), dtype=complex)
        pref = self.prefactor * 2 * UNITS.e / self.omega
        if self.charge_model == "grid":
            src, dens, area = self._planar_density()
            phase = np.exp(-1j * (qv @ src.T))
            for n, qn in enumerate(self.q_long):
                f = kernel_ft(np.sqrt(q2 + qn**2), self.modes.delta)
                out[:, n] = pref[n] * f * (phase @ dens[:, n]) * area
            return out
        d = self._dipoles()
        pos = self.modes.positions
        phase = np.exp(-1j * (qv @ pos[:, :2].T))  # (P, L)
        for n, qn in enumerate(self.q_long):
            f = kernel_ft(np.sqrt(q2 + qn**2), self.modes.delta)
            coup = -1j * (qv @ d[n][:, :2].T) + 1j * qn * d[n][None, :, 2]  # (P, L)
            zph = np.exp(1j * qn * pos[:, 2])[None, :]
            out[:, n] = pref[n] * f * (coup * phase * zph).sum(1)
        return out


def w_vibrational(basis: VibrationalBasis, points) -> np.ndarray:
    """Profiles w_n(R) at transverse points (P, 2), shape (P, n_modes)."""
    return basis.profile(points)


def m_vibrational(basis: VibrationalBasis, q) -> np.ndarray:
    """Closed-form transfer amplitudes M_n(Q), shape (P, n_modes)."""
    return basis.transfer(q)


# -------------------------------------------------------------- file format


def _fail(path, lineno, msg):
    raise IngestionError(f"{path}:{lineno}: {msg}")


def load_vibrational(path) -> VibrationalModeSet:
    """Read the line-based vibrational format.

    ::

        NATOMS n NMODES m HGAMMA_meV g DELTA_nm d
        element mass_amu x y z q_eff          (n lines)
        MODE k homega_meV w                    (m blocks)
        ex ey ez                               (n lines per block)
        GRID relative/path.bin                 (optional)

    ``#`` starts a comment.  Mode vectors must be orthonormal to 1e-4; they
    are then symmetrically re-orthonormalised.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    lines = []
    for k, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append((k, s.split()))
    if not lines:
        raise IngestionError(f"{path}: empty file")
    it = iter(lines)

    k, tok = next(it)
    head = dict(zip(tok[0::2], tok[1::2]))
    try:
        n_atoms, n_modes = int(head["NATOMS"]), int(head["NMODES"])
        gamma = float(head.get("HGAMMA_meV", 1.0)) * 1e-3
        delta = float(head.get("DELTA_nm", 0.02))
    except (KeyError, ValueError):
        _fail(path, k, "header must read 'NATOMS n NMODES m HGAMMA_meV g DELTA_nm d'")
    if n_atoms < 1 or n_modes < 1:
        _fail(path, k, "NATOMS and NMODES must be positive")

    elements, masses, pos, charges = [], [], [], []
    for _ in range(n_atoms):
        try:
            k, tok = next(it)
        except StopIteration:
            _fail(path, "EOF", f"expected {n_atoms} atom lines")
        if len(tok) != 6:
            _fail(path, k, "atom line must be 'element mass_amu x y z q_eff'")
        try:
            vals = [float(t) for t in tok[1:]]
        except ValueError:
            _fail(path, k, "non-numeric atom field")
        if not vals[0] > 0:
            _fail(path, k, "atomic mass must be positive")
        elements.append(tok[0])
        masses.append(vals[0])
        pos.append(vals[1:4])
        charges.append(vals[4])

    omega, vectors, mode_lines = [], [], []
    for _ in range(n_modes):
        try:
            k, tok = next(it)
        except StopIteration:
            _fail(path, "EOF", f"expected {n_modes} MODE blocks")
        if len(tok) != 3 or tok[0] != "MODE":
            _fail(path, k, "expected 'MODE k homega_meV w'")
        try:
            w = float(tok[2]) * 1e-3
        except ValueError:
            _fail(path, k, "non-numeric mode energy")
        if not w > 0:
            _fail(path, k, "mode energy must be positive")
        mode_lines.append(k)
        vec = []
        for _ in range(n_atoms):
            try:
                kk, t = next(it)
                if len(t) != 3:
                    raise ValueError
                vec.append([float(x) for x in t])
            except StopIteration:
                _fail(path, "EOF", f"mode block at line {k} is incomplete")
            except ValueError:
                _fail(path, kk, "displacement line must be 'ex ey ez'")
        omega.append(w)
        vectors.append(vec)

    grid = None
    for k, tok in it:
        if tok[0] == "GRID" and len(tok) == 2:
            gpath = (path.parent / tok[1]) if not Path(tok[1]).is_absolute() else Path(tok[1])
            try:
                grid = read_charge_grid(gpath, n_atoms)
            except OSError as exc:
                _fail(path, k, f"cannot read charge grid {gpath}: {exc}")
        else:
            _fail(path, k, "unexpected trailing content")

    vectors = np.asarray(vectors, dtype=float)
    flat = vectors.reshape(n_modes, -1)
    gram = flat @ flat.T
    err = np.abs(gram - np.eye(n_modes))
    if err.max() > ORTHO_TOL_FILE:
        a, b = np.unravel_index(np.argmax(err), err.shape)
        _fail(path, mode_lines[a],
              f"mode vectors not orthonormal: <e{a + 1}|e{b + 1}> = {gram[a, b]:.6g}")
    # Loewdin clean-up so the stored set is orthonormal to machine precision
    val, vec = np.linalg.eigh(gram)
    flat = vec @ np.diag(val**-0.5) @ vec.T @ flat
    return VibrationalModeSet(
        elements=tuple(elements),
        masses=np.asarray(masses),
        positions=np.asarray(pos),
        omega=np.asarray(omega),
        vectors=flat.reshape(vectors.shape),
        charges=np.asarray(charges),
        grid=grid,
        gamma=gamma,
        delta=delta,
    )


def save_vibrational(modes: VibrationalModeSet, path, grid_path: str | None = None) -> None:
    """Write ``modes`` in the format read by :func:`load_vibrational`."""
    charges = modes.charges if modes.charges is not None else np.zeros(modes.n_atoms)
    out = [
        f"NATOMS {modes.n_atoms} NMODES {modes.n_modes} "
        f"HGAMMA_meV {modes.gamma * 1e3:.17g} DELTA_nm {modes.delta:.17g}"
    ]
    for el, m, r, q in zip(modes.elements, modes.masses, modes.positions, charges):
        out.append(f"{el} {m:.17g} {r[0]:.17g} {r[1]:.17g} {r[2]:.17g} {q:.17g}")
    for n in range(modes.n_modes):
        out.append(f"MODE {n + 1} {modes.omega[n] * 1e3:.17g}")
        out.extend(f"{e[0]:.17g} {e[1]:.17g} {e[2]:.17g}" for e in modes.vectors[n])
    if grid_path is not None:
        out.append(f"GRID {grid_path}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------- surrogate


def surrogate_ring_molecule(
    omega_meV: float = 440.0,
    q_eff: float = 0.3,
    ring_radius: float = 0.145,
    bond: float = 0.101,
    gamma_meV: float = 1.0,
    delta: float = 0.02,
    heavy: tuple[str, float] = ("N", 14.007),
    light: tuple[str, float] = ("H", 1.008),
) -> VibrationalModeSet:
    """Three X-H stretch oscillators on a planar ring (C3 symmetric).

    Heavy atoms sit at angles 90, 210 and 330 degrees on a ring of radius
    ``ring_radius`` with a light atom ``bond`` further out.  Only the X-H
    bonds carry springs, so the three stretches are uncoupled and exactly
    degenerate at ``omega_meV``.  Mode j is the centre-of-mass-preserving
    stretch of bond j, with the heavy atom charged -q_eff and the light one
    +q_eff.
    """
    (hx, m_h), (lx, m_l) = heavy, light
    angles = np.deg2rad([90.0, 210.0, 330.0])
    u = np.stack([np.cos(angles), np.sin(angles), np.zeros(3)], axis=1)
    pos = np.concatenate([ring_radius * u, (ring_radius + bond) * u])
    masses = np.array([m_h] * 3 + [m_l] * 3)
    charges = np.array([-q_eff] * 3 + [q_eff] * 3)
    vectors = np.zeros((3, 6, 3))
    for j in range(3):
        vectors[j, j] = -math.sqrt(m_l / (m_h + m_l)) * u[j]
        vectors[j, 3 + j] = math.sqrt(m_h / (m_h + m_l)) * u[j]
    return VibrationalModeSet(
        elements=(hx,) * 3 + (lx,) * 3,
        masses=masses,
        positions=pos,
        omega=np.full(3, omega_meV * 1e-3),
        vectors=vectors,
        charges=charges,
        gamma=gamma_meV * 1e-3,
        delta=delta,
    )
