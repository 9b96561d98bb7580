"""Shared fixtures: beams, meshes and mode bases reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from eshaper import beam_from_energy, build_sphere_mesh, build_triangle_mesh, plasmon_basis
from eshaper.vibrational import VibrationalBasis, surrogate_ring_molecule


@pytest.fixture(scope="session")
def beam100():
    return beam_from_energy(100e3, 1.5e-3, 0.75e-3, 1257, 49)


@pytest.fixture(scope="session")
def beam60():
    return beam_from_energy(60e3, 0.1, 0.1, 1257, 29)


@pytest.fixture(scope="session")
def sphere_mesh():
    return build_sphere_mesh(5.0, 1000)


@pytest.fixture(scope="session")
def triangle_mesh():
    return build_triangle_mesh(10.0, 2.0, 1500, 0.5)


@pytest.fixture(scope="session")
def triangle_basis(triangle_mesh, beam100):
    return plasmon_basis(triangle_mesh, beam100.hbar_v, 5)


@pytest.fixture(scope="session")
def small_triangle_basis(beam100):
    """Coarse triangle (fast) for tests that only need a plausible plasmon basis."""
    return plasmon_basis(build_triangle_mesh(10.0, 2.0, 400, 0.5), beam100.hbar_v, 5)


@pytest.fixture(scope="session")
def surrogate_basis(beam60):
    return VibrationalBasis(surrogate_ring_molecule(), beam60.hbar_v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get(
        "tests.test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
