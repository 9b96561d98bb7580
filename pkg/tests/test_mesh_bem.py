"""Surface meshes and the electrostatic surface eigenproblem."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from eshaper import (
    Drude,
    MeshFormatError,
    build_sphere_mesh,
    build_triangle_mesh,
    drude_dress,
    eigensolve,
    g_lorentzian,
    g_plasmon,
    load_mesh,
    save_mesh,
)
from eshaper.bem import assemble_operators, degeneracy_groups
from eshaper.mesh import rounded_triangle_area, rounded_triangle_perimeter


@pytest.fixture(scope="module")
def sphere_modes(sphere_mesh):
    t0 = time.perf_counter()
    modes = eigensolve(sphere_mesh, 8)
    return modes, time.perf_counter() - t0


def test_sphere_mesh_geometry(sphere_mesh):
    assert 900 <= sphere_mesh.n <= 1100
    assert sphere_mesh.total_area == pytest.approx(4 * math.pi * 25, rel=0.01)
    assert sphere_mesh.closure_defect() < 1e-6
    np.testing.assert_allclose(np.linalg.norm(sphere_mesh.centroids, axis=1), 5.0, rtol=0.01)


def test_sphere_multipole_eigenvalues(sphere_modes):
    modes, elapsed = sphere_modes
    lam = modes.lam
    # lambda_l = -1 / (2 l + 1) with degeneracy 2 l + 1
    np.testing.assert_allclose(lam[:3], -1 / 3, atol=0.02)
    np.testing.assert_allclose(lam[3:8], -1 / 5, atol=0.02)
    assert elapsed < 60


def test_sphere_degeneracy_grouping(sphere_modes):
    modes, _ = sphere_modes
    assert [len(g) for g in degeneracy_groups(modes.lam, 0.01)] == [3, 5]


def test_drude_energies_hand_values():
    d = Drude(eps_b=4.0, omega_p=9.17, gamma=0.021)

    def omega(lam):
        return d.omega_p / math.sqrt(d.eps_b + (1 - lam) / (1 + lam))

    assert omega(-1 / 3) == pytest.approx(9.17 / math.sqrt(6), rel=1e-12)
    assert omega(-1 / 3) == pytest.approx(3.744, abs=1e-3)
    assert omega(0.0) == pytest.approx(4.101, abs=1e-3)


def test_dressed_sphere_dipole_energy(sphere_modes):
    dressed = drude_dress(sphere_modes[0])
    np.testing.assert_allclose(dressed.omega[:3], 3.744, rtol=0.02)


def test_coulomb_gram_identity(sphere_modes):
    modes, _ = sphere_modes
    np.testing.assert_allclose(modes.gram(), np.eye(modes.n_modes), atol=1e-8)


def test_operator_symmetrisability(sphere_mesh):
    k, p = assemble_operators(sphere_mesh)
    pk = p @ k
    assert np.linalg.norm(pk - pk.T) / np.linalg.norm(pk) < 0.05
    assert np.all(np.linalg.eigvalsh(0.5 * (p + p.T)) > 0)


def test_eigenvalues_within_open_interval(triangle_mesh):
    modes = eigensolve(triangle_mesh, 10)
    assert np.all((modes.lam > -1) & (modes.lam < 1))
    assert np.all(np.diff(modes.lam) >= -1e-12)
    assert modes.residual < 0.1


def test_triangle_area_matches_rounded_prism(triangle_mesh):
    s, t, r = 10.0, 2.0, 0.5
    exact = 2 * rounded_triangle_area(s, r) + t * rounded_triangle_perimeter(s, r)
    assert triangle_mesh.total_area == pytest.approx(exact, rel=0.02)


def test_triangle_mesh_mirror_symmetry(triangle_mesh):
    perm = triangle_mesh.mirror_permutation(axis=1)
    assert perm is not None
    np.testing.assert_allclose(triangle_mesh.areas[perm], triangle_mesh.areas, rtol=1e-9)


def test_exact_and_lorentzian_peaks_agree(triangle_basis):
    w = np.linspace(2.0, 4.0, 40001)
    exact = triangle_basis.g(w)
    lor = g_lorentzian(triangle_basis.omega, triangle_basis.gamma, triangle_basis.weight, w)
    for n in range(triangle_basis.n_modes):
        assert abs(w[np.argmax(exact[:, n])] - w[np.argmax(lor[:, n])]) < triangle_basis.gamma[n]
        # the Lorentzian area G_n matches the exact spectral weight
        assert exact[np.argmax(lor[:, n]), n] == pytest.approx(lor[:, n].max(), rel=0.01)


def test_g_plasmon_is_positive(triangle_basis):
    g = g_plasmon(triangle_basis.modes, np.linspace(0.5, 6, 200))
    assert np.all(g > 0)


def test_mesh_file_roundtrip(tmp_path, sphere_mesh):
    p = tmp_path / "sphere.mesh"
    save_mesh(sphere_mesh, p)
    m = load_mesh(p)
    np.testing.assert_array_equal(m.centroids, sphere_mesh.centroids)
    np.testing.assert_array_equal(m.areas, sphere_mesh.areas)
    lam = eigensolve(m, 3).lam
    np.testing.assert_allclose(lam, -1 / 3, atol=0.03)


@pytest.mark.parametrize("text, line", [
    ("", None),
    ("abc\n", "1"),
    ("2\n0 0 0 0 0 1 1\n0 0 0 0 0 1\n", "3"),
    ("1\n0 0 0 0 0 1 x\n", "2"),
])
def test_mesh_format_errors(tmp_path, text, line):
    p = tmp_path / "bad.mesh"
    p.write_text(text)
    with pytest.raises(MeshFormatError) as err:
        load_mesh(p)
    if line is not None:
        assert f":{line}:" in str(err.value)


def test_mesh_count_mismatch(tmp_path):
    p = tmp_path / "bad.mesh"
    p.write_text("3\n0 0 0 0 0 1 1\n")
    with pytest.raises(MeshFormatError, match="announces 3"):
        load_mesh(p)


def test_triangle_rejects_bad_geometry():
    with pytest.raises(ValueError):
        build_triangle_mesh(10.0, -2.0, 500, 0.5)


def test_small_sphere_mesh_builds():
    m = build_sphere_mesh(1.0, 100)
    assert m.n >= 20
