"""Remaining per-operation examples: limits, symmetries and degenerate inputs."""

from __future__ import annotations

import math

import numpy as np
import pytest

from eshaper import (
    UNITS,
    ComplexField,
    Entangle,
    PixelGrid,
    TransferMatrixSampled,
    VibrationalBasis,
    VibrationalModeSet,
    beam_from_energy,
    build_inversion_system,
    build_sphere_mesh,
    build_triangle_mesh,
    eels_map,
    eels_spectrum,
    eigensolve,
    forward_scatter,
    g_lorentzian,
    g_vibrational,
    make_disk_grid,
    make_shaping_grids,
    solve_incident,
    wavefunction_to_realspace,
)
from eshaper.modes import ProfileFrame
from eshaper.shaper import InversionSystem

# ---------------------------------------------------------------- grid-core


def test_delta_field_is_constant_plane_wave():
    g = make_disk_grid(1.0, 1)
    assert g.n == 1 and np.all(g.centers == 0)
    m = wavefunction_to_realspace(ComplexField(g, np.array([1 / g.area + 0j])))
    np.testing.assert_allclose(m.values, 1 / (2 * math.pi), rtol=1e-12)


def test_uniform_disk_field_peaks_at_origin():
    g = make_disk_grid(1.0, 49)
    m = wavefunction_to_realspace(ComplexField(g, np.ones(g.n, complex)))
    a = np.abs(m.values)
    iy, ix = np.unravel_index(np.argmax(a), a.shape)
    assert m.x[ix] == pytest.approx(0, abs=m.spacing) and m.x[iy] == pytest.approx(0, abs=m.spacing)


def test_nonrelativistic_limit_of_velocity():
    b = beam_from_energy(100.0, 1e-3, 1e-3)
    beta = b.velocity
    assert beta == pytest.approx(math.sqrt(2 * 100.0 / UNITS.me_c2), rel=0.01)


# ---------------------------------------------------------------- bem-plasmon


def test_sphere_500_area_and_outward_normals():
    m = build_sphere_mesh(5.0, 500)
    assert m.total_area == pytest.approx(4 * math.pi * 25, rel=0.01)
    assert np.all(np.einsum("ij,ij->i", m.normals, m.centroids) > 0)


def test_triangle_mesh_convergence():
    lam = [eigensolve(build_triangle_mesh(10.0, 2.0, n, 0.5), 4).lam[0] for n in (200, 800)]
    assert abs(lam[0] / lam[1] - 1) < 0.05


def test_lorentzian_peak_value_and_tail():
    w, gam, G = 2.5, 0.02, 3.0
    assert g_lorentzian(w, gam, G, w) == pytest.approx(2 * G / (math.pi * gam), rel=1e-12)
    assert g_lorentzian(w, gam, G, 1e4) < 1e-6 * g_lorentzian(w, gam, G, w)


def test_plasmon_g_vanishes_at_high_energy(triangle_basis):
    peak = triangle_basis.g(triangle_basis.omega).max()
    assert np.all(triangle_basis.g(200.0) < 1e-3 * peak)


# ---------------------------------------------------------------- mode-models


def test_plasmon_profile_decays(triangle_basis):
    b = triangle_basis
    r = 10 * b.hbar_v / float(b.omega[0])
    near = np.abs(b.profile([[3.0, 0.0]])).max()
    far = np.abs(b.profile([[r, 0.0], [0.0, r], [-r, 0.0]])).max()
    assert far < 1e-3 * near


@pytest.mark.parametrize("mode, axis", [(0, 0), (1, 1)])
def test_dipole_profiles_are_two_lobed(triangle_basis, mode, axis):
    # dipoles: opposite-sign lobes on either side of the particle along their axis
    pts = np.zeros((2, 2))
    pts[:, axis] = [-3.0, 3.0]
    w = triangle_basis.profile(pts)[:, mode].real
    assert w[0] * w[1] < 0
    assert 0.2 < abs(w[0] / w[1]) < 5


def test_fourier_of_zero_and_real_even_profiles():
    x = np.linspace(-5, 5, 101)
    xx, yy = np.meshgrid(x, x)
    zero = ProfileFrame(x, np.zeros((1, 101, 101)))
    assert np.all(zero.fourier([[0.3, -0.2]]) == 0)
    even = ProfileFrame(x, np.exp(-(xx**2 + 2 * yy**2))[None])
    q = np.array([[0.7, 0.3], [-0.7, -0.3]])
    m = even.fourier(q)[:, 0]
    assert np.abs(m.imag).max() < 1e-12 * np.abs(m).max()
    assert m[0] == pytest.approx(m[1], rel=1e-12)


def _single_atom(e):
    return VibrationalModeSet(("N",), np.array([14.0]), np.zeros((1, 3)), np.array([0.44]),
                              np.array([[e]], dtype=float), charges=np.array([0.3]))


def test_single_atom_profile_is_odd_with_node():
    b = VibrationalBasis(_single_atom([1.0, 0.0, 0.0]), 100.0)
    t = np.linspace(0.01, 0.5, 20)
    plus = b.profile(np.stack([t, 0 * t], 1))[:, 0]
    minus = b.profile(np.stack([-t, 0 * t], 1))[:, 0]
    np.testing.assert_allclose(plus, -minus, rtol=1e-12, atol=1e-14 * np.abs(plus).max())
    at = b.profile([[0.0, 0.0]])[0, 0]
    assert np.isfinite(at) and abs(at) < 1e-12 * np.abs(plus).max()
    # regularisation keeps the profile finite right next to the atom
    assert np.all(np.isfinite(b.profile([[1e-9, 0.0], [0.0, 1e-9]])))


def test_vibrational_g_peak_and_tail():
    m = _single_atom([0.0, 0.0, 1.0])
    assert g_vibrational(m, 0.44)[0] == pytest.approx(440.0, abs=1.0)
    assert g_vibrational(m, 5.0)[0] < 1e-3


def test_two_atom_toy_mode_accepted():
    e = np.array([[[1, 0, 0], [1, 0, 0]]]) / math.sqrt(2)
    m = VibrationalModeSet(("C", "O"), np.array([12.0, 16.0]), np.array([[0, 0, 0], [0.12, 0, 0.0]]),
                           np.array([0.2]), e, charges=np.array([0.1, -0.1]))
    assert m.n_modes == 1


# ---------------------------------------------------------------- shaper


@pytest.fixture(scope="module")
def wide_setup(small_triangle_basis):
    beam = beam_from_energy(100e3, 4e-3, 2e-3, 317, 13)
    grids = make_shaping_grids(beam)
    tm = TransferMatrixSampled.build(small_triangle_basis, grids.incident, grids.detector,
                                     grids.fine)
    return small_triangle_basis, grids, tm


def test_zero_field_scatters_nothing(wide_setup):
    basis, grids, tm = wide_setup
    zero = ComplexField(grids.incident, np.zeros(grids.incident.n, complex))
    fin = forward_scatter(zero, tm, grids.detector)
    assert np.all(fin.amplitudes == 0)
    assert np.all(eels_spectrum(fin, [2.5, 3.0]) == 0)


def test_delta_input_reads_out_a_column(wide_setup):
    basis, grids, tm = wide_setup
    inc = grids.incident
    vals = np.zeros(inc.n, complex)
    i0 = int(np.flatnonzero((inc.index == 0).all(1))[0])
    vals[i0] = 1.0
    fin = forward_scatter(ComplexField(inc, vals), tm, grids.detector)
    expect = basis.transfer(grids.detector.centers).T * inc.area
    np.testing.assert_allclose(fin.amplitudes, expect, rtol=1e-10, atol=1e-14)


def test_loss_map_nonnegative(wide_setup, rng):
    basis, grids, tm = wide_setup
    for _ in range(3):
        a = ComplexField(grids.incident, rng.normal(size=grids.incident.n)
                         + 1j * rng.normal(size=grids.incident.n))
        gm = eels_map(a, basis, 2.7, grids.detector, tm=tm, method="momentum")
        assert np.all(gm >= 0)


def test_standard_system_shape(small_triangle_basis):
    beam = beam_from_energy(100e3, 1.5e-3, 0.75e-3, 1257, 49)
    g = make_shaping_grids(beam)
    tm = TransferMatrixSampled.build(small_triangle_basis, g.incident, g.detector)
    sys_ = build_inversion_system(tm, g.incident, g.detector, Entangle(((0, 0),)))
    assert sys_.shape == (49 * 5, 1257)


def test_identity_system_returns_target():
    n = 6
    grid = PixelGrid(10.0, 1.0, np.stack([np.arange(n), np.zeros(n, int)], 1))
    b = np.arange(1, n + 1) / np.linalg.norm(np.arange(1, n + 1)) + 0j
    res = solve_incident(InversionSystem(np.eye(n, dtype=complex), b, grid, grid, 1))
    np.testing.assert_allclose(res.raw, b, rtol=1e-12)


def test_entangled_pattern_lands_on_targets(wide_setup):
    basis, grids, tm = wide_setup
    det = grids.detector
    pix = {tuple(ij): f for f, ij in enumerate(det.index)}
    pairs = ((0, pix[(-1, 0)]), (1, pix[(1, 0)]))
    res = solve_incident(build_inversion_system(tm, grids.incident, det, Entangle(pairs)))
    fin = forward_scatter(res.alpha, tm, det)
    amp = np.abs(fin.amplitudes)
    for n, f in pairs:
        assert np.argmax(amp[n]) == f
