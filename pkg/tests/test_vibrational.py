"""Vibrational modes: surrogate molecule, charge models and file ingestion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from eshaper import (
    UNITS,
    IngestionError,
    ParameterError,
    VibrationalBasis,
    VibrationalModeSet,
    g_vibrational,
    load_vibrational,
    m_vibrational,
    surrogate_ring_molecule,
    w_vibrational,
)
from eshaper.vibrational import (
    GriddedCharge,
    read_charge_grid,
    save_vibrational,
    write_charge_grid,
)


def _spring_model(mol, omega):
    """Mass-weighted Hessian of springs along each X-H bond, diagonalised independently."""
    pos, m = mol.positions, mol.masses
    n = len(m)
    mu = m[0] * m[3] / (m[0] + m[3])
    k = mu * omega**2  # spring constant in amu eV^2 (units cancel in the mass weighting)
    hess = np.zeros((3 * n, 3 * n))
    for j in range(3):
        a, b = j, j + 3
        u = pos[b] - pos[a]
        u /= np.linalg.norm(u)
        blk = k * np.outer(u, u)
        for p, q_, s in ((a, a, 1), (b, b, 1), (a, b, -1), (b, a, -1)):
            hess[3 * p:3 * p + 3, 3 * q_:3 * q_ + 3] += s * blk
    w = 1 / np.sqrt(np.repeat(m, 3))
    dyn = w[:, None] * hess * w[None, :]
    val, vec = np.linalg.eigh(dyn)
    return np.sqrt(np.clip(val, 0, None)), vec


def test_surrogate_matches_spring_model():
    mol = surrogate_ring_molecule()
    freq, vec = _spring_model(mol, 0.44)
    nonzero = freq > 1e-6
    assert np.count_nonzero(nonzero) == 3
    np.testing.assert_allclose(freq[nonzero], 0.44, rtol=1e-12)
    # the surrogate's vectors span the same degenerate eigenspace
    space = vec[:, nonzero]
    flat = mol.vectors.reshape(3, -1).T
    np.testing.assert_allclose(space @ (space.T @ flat), flat, atol=1e-12)


def test_surrogate_degenerate_group(surrogate_basis):
    assert surrogate_basis.groups() == [[0, 1, 2]]
    np.testing.assert_allclose(surrogate_basis.omega, 0.44)
    np.testing.assert_allclose(surrogate_basis.weight, math.pi * 0.44 / 2)


def test_surrogate_threefold_symmetry(surrogate_basis, rng):
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    rot = np.array([[c, -s], [s, c]])
    pts = rng.uniform(-1, 1, size=(30, 2))
    w = w_vibrational(surrogate_basis, pts)
    w_rot = w_vibrational(surrogate_basis, pts @ rot.T)
    # rotating the position by +120 degrees maps the stretch of bond 1 onto bond 2
    np.testing.assert_allclose(w_rot[:, 1], w[:, 0], rtol=1e-10, atol=1e-14)
    q = rng.uniform(-50, 50, size=(10, 2))
    np.testing.assert_allclose(np.abs(m_vibrational(surrogate_basis, q @ rot.T)[:, 1]),
                               np.abs(m_vibrational(surrogate_basis, q)[:, 0]), rtol=1e-10)


def test_spectral_function_peak():
    mol = surrogate_ring_molecule()
    w = np.linspace(0.43, 0.45, 20001)
    g = g_vibrational(mol, w)
    assert w[np.argmax(g[:, 0])] == pytest.approx(0.44, abs=2e-5)
    # area under g equals G = pi omega / 2
    assert np.trapezoid(g[:, 0], w) == pytest.approx(math.pi * 0.44 / 2, rel=0.05)


def _smeared_grid(mol, sigma):
    """-q_l u.grad of a normalised Gaussian of width sigma around every atom."""
    h = sigma / 2
    pos = mol.positions
    lo = pos.min(0) - 8 * sigma
    n = np.ceil((pos.max(0) + 8 * sigma - lo) / h).astype(int) + 1
    ax = [lo[k] + h * np.arange(n[k]) for k in range(3)]
    xyz = np.meshgrid(*ax, indexing="ij")
    vals = np.zeros((mol.n_atoms, 3, *n))
    for l, (r, q) in enumerate(zip(pos, mol.charges)):
        d = [xyz[k] - r[k] for k in range(3)]
        g = np.exp(-(d[0] ** 2 + d[1] ** 2 + d[2] ** 2) / (2 * sigma**2))
        g /= (2 * math.pi) ** 1.5 * sigma**3
        for c in range(3):
            vals[l, c] = q * d[c] / sigma**2 * g
    return GriddedCharge(lo, h, vals)


def test_gridded_model_converges_to_point_charges(beam60):
    mol = surrogate_ring_molecule()
    point = VibrationalBasis(mol, beam60.hbar_v)
    q = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 7.0], [10.0, -5.0], [20.0, 0.0]])
    pts = np.array([[0.5, 0.3], [1.0, 1.0], [-2.0, 0.1]])
    ref_m, ref_w = point.transfer(q), point.profile(pts)
    errs = []
    for sigma in (0.04, 0.02, 0.01):
        modes = VibrationalModeSet(mol.elements, mol.masses, mol.positions, mol.omega,
                                   mol.vectors, None, _smeared_grid(mol, sigma), mol.gamma,
                                   mol.delta)
        grid = VibrationalBasis(modes, beam60.hbar_v, "grid")
        errs.append(float((np.abs(grid.transfer(q) - ref_m).max(0) / np.abs(ref_m).max(0)).max()))
        werr = np.abs(grid.profile(pts) - ref_w).max(0) / np.abs(ref_w).max(0)
        assert werr.max() < 1e-4
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 0.02


def test_charge_grid_roundtrip(tmp_path, rng):
    g = GriddedCharge(np.array([-1.0, 0.5, 0.0]), 0.1, rng.normal(size=(2, 3, 4, 5, 3)))
    p = tmp_path / "rho.bin"
    write_charge_grid(g, p)
    back = read_charge_grid(p, 2)
    np.testing.assert_array_equal(back.values, g.values)
    assert back.spacing == 0.1
    with pytest.raises(IngestionError, match="expected 3"):
        read_charge_grid(p, 3)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(IngestionError, match="bytes"):
        read_charge_grid(p)


def test_file_roundtrip(tmp_path):
    mol = surrogate_ring_molecule()
    p = tmp_path / "ring.vib"
    save_vibrational(mol, p)
    back = load_vibrational(p)
    np.testing.assert_allclose(back.vectors, mol.vectors, atol=1e-15)
    np.testing.assert_array_equal(back.omega, mol.omega)
    np.testing.assert_array_equal(back.charges, mol.charges)
    assert back.gamma == pytest.approx(mol.gamma, rel=1e-15)


def test_file_with_grid(tmp_path, beam60):
    mol = surrogate_ring_molecule()
    write_charge_grid(_smeared_grid(mol, 0.04), tmp_path / "rho.bin")
    save_vibrational(mol, tmp_path / "ring.vib", grid_path="rho.bin")
    back = load_vibrational(tmp_path / "ring.vib")
    assert back.grid is not None
    VibrationalBasis(back, beam60.hbar_v, "grid").transfer([[1.0, 0.0]])


GOOD = """# two-atom test
NATOMS 2 NMODES 1 HGAMMA_meV 1 DELTA_nm 0.02
N 14.007 0 0 0 -0.3
H 1.008 0.1 0 0 0.3
MODE 1 440
-0.2590 0 0
0.9659 0 0
"""


def _write(tmp_path, text):
    p = tmp_path / "m.vib"
    p.write_text(text)
    return p


def test_loader_accepts_comments(tmp_path):
    mol = load_vibrational(_write(tmp_path, GOOD))
    assert mol.n_modes == 1 and mol.n_atoms == 2
    np.testing.assert_allclose(mol.overlap(), 1.0, atol=1e-14)


@pytest.mark.parametrize("old, new, line", [
    ("NATOMS 2 NMODES 1", "NATOMS two NMODES 1", 2),
    ("H 1.008 0.1 0 0 0.3", "H 1.008 0.1 0 0", 4),
    ("N 14.007", "N -14.007", 3),
    ("MODE 1 440", "MOD 1 440", 5),
    ("0.9659 0 0", "0.9659 0", 7),
    ("0.9659 0 0", "0.5 0 0", 5),
    ("MODE 1 440", "MODE 1 -440", 5),
])
def test_loader_errors_name_the_line(tmp_path, old, new, line):
    p = _write(tmp_path, GOOD.replace(old, new))
    with pytest.raises(IngestionError, match=f":{line}:"):
        load_vibrational(p)


def test_loader_rejects_trailing_content_and_truncation(tmp_path):
    with pytest.raises(IngestionError, match=":8:"):
        load_vibrational(_write(tmp_path, GOOD + "junk\n"))
    with pytest.raises(IngestionError, match="EOF"):
        load_vibrational(_write(tmp_path, "\n".join(GOOD.splitlines()[:6])))
    with pytest.raises(IngestionError, match="empty"):
        load_vibrational(_write(tmp_path, "# nothing\n"))


def test_loader_orthonormality_tolerance(tmp_path):
    # a 1e-5 deviation is accepted and cleaned up
    text = GOOD.replace("0.9659 0 0", "0.965932 0 0").replace("-0.2590 0 0", "-0.258815 0 0")
    mol = load_vibrational(_write(tmp_path, text))
    np.testing.assert_allclose(mol.overlap(), 1.0, atol=1e-14)


def test_modeset_invariants():
    mol = surrogate_ring_molecule()
    with pytest.raises(ParameterError):
        VibrationalModeSet(mol.elements, -mol.masses, mol.positions, mol.omega, mol.vectors,
                           mol.charges)
    with pytest.raises(ParameterError):
        VibrationalModeSet(mol.elements, mol.masses, mol.positions, mol.omega, 2 * mol.vectors,
                           mol.charges)
    with pytest.raises(ParameterError):
        VibrationalModeSet(mol.elements, mol.masses, mol.positions, mol.omega, mol.vectors, None)
    with pytest.raises(ParameterError):
        VibrationalBasis(mol, 100.0, "grid")


def test_mass_units():
    # 1 amu in eV / c^2 expressed in the hbar = 1 eV nm system
    assert UNITS.mass_from_amu(1.0) == pytest.approx(931.494e6 / 197.327**2, rel=1e-9)
