"""Beam kinematics, pixel grids and real-space rendering."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eshaper import (
    UNITS,
    ComplexField,
    ParameterError,
    ResolutionError,
    beam_from_energy,
    make_disk_grid,
    realspace_to_wavefunction,
    wavefunction_to_realspace,
)
from eshaper.grid import disk_lattice_counts

ME_C2 = 510998.95  # eV
HBAR_C = 197.327  # eV nm


def _beta(t):
    g = 1 + t / ME_C2
    return g, math.sqrt(1 - 1 / g**2)


@pytest.mark.parametrize("t, beta", [(100e3, 0.5482), (60e3, 0.4462)])
def test_beta_against_hand_formula(t, beta):
    b = beam_from_energy(t)
    assert b.velocity == pytest.approx(beta, abs=1e-4)
    assert b.gamma == pytest.approx(_beta(t)[0], rel=1e-7)


def test_wave_number_and_aperture_100kev():
    g, beta = _beta(100e3)
    b = beam_from_energy(100e3, 1.5e-3)
    assert g == pytest.approx(1.19569, abs=1e-5)
    assert b.k == pytest.approx(g * beta * ME_C2 / HBAR_C, rel=1e-6)
    assert b.k == pytest.approx(1697, abs=1)
    assert b.q_max_i == pytest.approx(2.546, abs=2e-3)


def test_nonrelativistic_switch_drops_gamma():
    b1 = beam_from_energy(100e3, relativistic_k=True)
    b0 = beam_from_energy(100e3, relativistic_k=False)
    assert b1.k / b0.k == pytest.approx(b1.gamma, rel=1e-12)


def test_longitudinal_wave_vector():
    b = beam_from_energy(100e3)
    assert b.q_longitudinal(3.0) == pytest.approx(3.0 / (b.velocity * HBAR_C), rel=1e-12)
    assert UNITS.e2 == pytest.approx(1.43996, rel=1e-5)


@pytest.mark.parametrize("kw", [dict(kinetic_energy=-1), dict(kinetic_energy=1e5, phi_i=0),
                                dict(kinetic_energy=1e5, n_pixels_i=0)])
def test_beam_rejects_nonphysical(kw):
    with pytest.raises(ParameterError):
        beam_from_energy(**kw)


@pytest.mark.parametrize("target", [1, 5, 9, 13, 29, 49, 317, 1257])
def test_disk_grid_counts(target):
    g = make_disk_grid(1.0, target)
    r2, counts = disk_lattice_counts(30)
    assert g.n == target or g.n == counts[np.argmin(np.abs(counts - target))]
    assert np.all(np.linalg.norm(g.centers, axis=1) <= 1.0 + 1e-9)


def test_disk_grid_exact_standard_counts():
    for n in (13, 29, 49, 1257):
        assert make_disk_grid(2.0, n).n == n


def test_disk_grid_errors():
    with pytest.raises(ParameterError):
        make_disk_grid(0.0, 10)
    with pytest.raises(ParameterError):
        make_disk_grid(1.0, 0)


def test_parseval_nine_pixels_direct_quadrature(rng):
    g = make_disk_grid(1.0, 9)
    vals = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    f = ComplexField(g, vals)
    # direct quadrature oracle: midpoint sum of psi over one period
    L = 2 * math.pi / g.pitch
    n = 64
    x = (np.arange(n) + 0.5) * L / n
    xx, yy = np.meshgrid(x, x)
    psi = sum(a * np.exp(1j * (q[0] * xx + q[1] * yy)) for a, q in zip(vals, g.centers))
    psi *= g.area / (2 * math.pi)
    lhs = (np.abs(psi) ** 2).sum() * (L / n) ** 2
    assert lhs == pytest.approx(f.norm2(), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 400), st.integers(0, 2**32 - 1))
def test_parseval_property(n_pix, seed):
    r = np.random.default_rng(seed)
    g = make_disk_grid(1.3, n_pix)
    f = ComplexField(g, r.normal(size=g.n) + 1j * r.normal(size=g.n))
    m = wavefunction_to_realspace(f)
    assert m.integral(lambda v: np.abs(v) ** 2).real == pytest.approx(f.norm2(), rel=1e-6)


def test_realspace_roundtrip(rng):
    g = make_disk_grid(1.0, 49)
    f = ComplexField(g, rng.normal(size=g.n) + 1j * rng.normal(size=g.n))
    back = realspace_to_wavefunction(wavefunction_to_realspace(f), g)
    np.testing.assert_allclose(back.values, f.values, atol=1e-10)


def test_realspace_nyquist_guard():
    g = make_disk_grid(1.0, 49)
    f = ComplexField(g, np.ones(g.n, complex))
    with pytest.raises(ResolutionError):
        wavefunction_to_realspace(f, n_points=4)


def test_normalized_and_refined():
    g = make_disk_grid(1.0, 49)
    f = ComplexField(g, np.arange(g.n) + 1j)
    assert f.normalized().norm2() == pytest.approx(1.0, rel=1e-14)
    fine = g.refined(4)
    assert fine.pitch == pytest.approx(g.pitch / 4)
    assert fine.n > 15 * g.n
