"""Build pipeline objects from a :class:`RunConfig` and run the batch stages."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bem import Drude
from .config import ConfigError, RunConfig
from .grid import ComplexField
from .mesh import build_sphere_mesh, build_triangle_mesh, load_mesh
from .modes import ModeBasis, plasmon_basis
from .shaper import (
    DimensionError,
    Entangle,
    FinalState,
    FractionMatrix,
    InversionResult,
    SelectMode,
    ShapingGrids,
    TransferMatrixSampled,
    build_inversion_system,
    eels_map,
    eels_spectrum,
    forward_scatter,
    fraction_matrix,
    make_shaping_grids,
    solve_incident,
)
from .units import BeamConfig
from .vibrational import VibrationalBasis, load_vibrational, surrogate_ring_molecule

__all__ = ["Run", "build_beam", "build_basis", "resolve_target", "run_modes", "run_shape", "run_forward"]

log = logging.getLogger(__name__)


@dataclass
class Run:
    """Everything a command produced, handed to the report writer."""

    command: str
    config: RunConfig
    beam: BeamConfig
    basis: ModeBasis
    sample_info: dict = field(default_factory=dict)
    grids: ShapingGrids | None = None
    tm: TransferMatrixSampled | None = None
    target: SelectMode | Entangle | None = None
    target_q: np.ndarray | None = None
    inversion: InversionResult | None = None
    alpha: ComplexField | None = None
    final: FinalState | None = None
    final_coarse: FinalState | None = None
    fractions: FractionMatrix | None = None
    energies: np.ndarray | None = None
    spectra: dict = field(default_factory=dict)
    eels_maps: dict = field(default_factory=dict)


def build_beam(cfg: RunConfig) -> BeamConfig:
    b = cfg.beam
    return BeamConfig(
        kinetic_energy=float(b["kinetic_energy_eV"]),
        phi_i=float(b["phi_i_mrad"]) * 1e-3,
        phi_f=float(b["phi_f_mrad"]) * 1e-3,
        n_pixels_i=int(b["incident_pixels"]),
        n_pixels_f=int(b["detector_pixels"]),
        relativistic_k=bool(b["relativistic_k"]),
    )


def build_basis(cfg: RunConfig, beam: BeamConfig) -> tuple[ModeBasis, dict]:
    """Construct the sample's mode basis and a provenance/diagnostics record."""
    s = cfg.sample
    n_modes = int(s["n_modes"])
    if s["kind"] == "vibrational":
        if s["surrogate"] is not None:
            modes = surrogate_ring_molecule(**s["surrogate"])
            info = {"source": "surrogate ring molecule", "parameters": dict(s["surrogate"])}
        else:
            path = cfg.resolve(s["vibrational_path"])
            modes = load_vibrational(path)
            info = {"source": str(path)}
        if n_modes > modes.n_modes:
            raise ConfigError(f"sample.n_modes = {n_modes} but the sample has {modes.n_modes} modes")
        basis = VibrationalBasis(modes.select(np.arange(n_modes)), beam.hbar_v, s["charge_model"])
        return basis, info
    if s["kind"] == "triangle":
        mesh = build_triangle_mesh(s["side_nm"], s["thickness_nm"], s["elements"], s["corner_rounding_nm"])
    elif s["kind"] == "sphere":
        mesh = build_sphere_mesh(s["radius_nm"], s["elements"])
    else:
        mesh = load_mesh(cfg.resolve(s["mesh_path"]))
    d = s["drude"]
    drude = Drude(eps_b=d["eps_b"], omega_p=d["omega_p_eV"], gamma=d["gamma_eV"])
    basis = plasmon_basis(mesh, beam.hbar_v, n_modes, drude=drude, bright_only=bool(s["bright_only"]))
    if basis.n_modes < n_modes:
        log.warning("only %d modes available (requested %d)", basis.n_modes, n_modes)
    info = {
        "source": mesh.provenance,
        "mesh_params": dict(mesh.params),
        "n_elements": int(mesh.n),
        "total_area_nm2": float(mesh.total_area),
        "eig_residual": float(basis.modes.residual),
        "kernel_asymmetry": float(basis.modes.asymmetry),
    }
    return basis, info


def resolve_target(cfg: RunConfig, grids: ShapingGrids, n_modes: int):
    """Target object (0-based indices) and the target wave vectors of entangle pairs."""
    t = cfg.target
    if t is None:
        raise ConfigError("this command needs a 'target' section")
    amp = complex(t.get("amplitude", 1.0))
    det = grids.detector
    if t["kind"] == "select":
        modes = tuple(int(m) - 1 for m in t["modes"])
        if max(modes) >= n_modes:
            raise ConfigError(f"target mode {max(modes) + 1} not in the {n_modes}-mode basis")
        return SelectMode(modes, amp), None
    pairs, qs = [], []
    for p in t["pairs"]:
        n = int(p["mode"]) - 1
        if n >= n_modes:
            raise ConfigError(f"target mode {n + 1} not in the {n_modes}-mode basis")
        if "pixel" in p:
            ix, iy = (int(v) for v in p["pixel"])
            hit = np.flatnonzero((det.index[:, 0] == ix) & (det.index[:, 1] == iy))
            if hit.size == 0:
                raise ConfigError(f"target pixel ({ix}, {iy}) is outside the detector disk")
            f = int(hit[0])
        else:
            q = np.asarray(p["q"], dtype=float)
            if np.linalg.norm(q) > det.q_max * (1 + 1e-9) + 0.5 * det.pitch:
                raise ConfigError(f"target wave vector {tuple(q)} lies outside the detector disk")
            f = det.locate(q)
        pairs.append((n, f))
        qs.append(det.centers[f])
    try:
        target = Entangle(tuple(pairs), amp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return target, np.asarray(qs)


def energy_window(cfg: RunConfig, basis: ModeBasis) -> np.ndarray:
    win = cfg.analysis["energy_window_eV"]
    if win is None:
        pad = max(15 * float(basis.gamma.max()), 0.02 * float(basis.omega.max()))
        win = (max(float(basis.omega.min()) - pad, 1e-3), float(basis.omega.max()) + pad)
    return np.linspace(win[0], win[1], int(cfg.analysis["n_energies"]))


def run_modes(cfg: RunConfig) -> Run:
    beam = build_beam(cfg)
    basis, info = build_basis(cfg, beam)
    run = Run("modes", cfg, beam, basis, info)
    run.energies = energy_window(cfg, basis)
    return run


def _prepare(cfg: RunConfig, command: str) -> Run:
    run = run_modes(cfg)
    run.command = command
    grids = make_shaping_grids(run.beam, cfg.beam["fine_factor"])
    run.grids = grids
    run.tm = TransferMatrixSampled.build(run.basis, grids.incident, grids.detector, grids.fine,
                                         method=cfg.solver["transfer"])
    return run


def run_shape(cfg: RunConfig, run: Run | None = None) -> Run:
    run = run or _prepare(cfg, "shape")
    grids = run.grids
    run.target, run.target_q = resolve_target(cfg, grids, run.basis.n_modes)
    system = build_inversion_system(run.tm, grids.incident, grids.detector, run.target)
    run.inversion = solve_incident(system, cfg.solver["svd_cutoff"], cfg.solver["tikhonov"])
    run.alpha = run.inversion.alpha
    return run


def run_forward(cfg: RunConfig, alpha: ComplexField | None = None) -> Run:
    """Scatter a given (or freshly shaped) incident beam and analyse the final state."""
    run = _prepare(cfg, "forward")
    if alpha is None:
        run = run_shape(cfg, run)
    else:
        if not alpha.grid.same_as(run.grids.incident):
            raise DimensionError(
                f"incident field has {alpha.grid.n} pixels at pitch {alpha.grid.pitch:.9g}, "
                f"the configured incident grid has {run.grids.incident.n} at pitch "
                f"{run.grids.incident.pitch:.9g}"
            )
        run.alpha = alpha
        if cfg.target is not None:
            run.target, run.target_q = resolve_target(cfg, run.grids, run.basis.n_modes)
    method = cfg.solver["forward"]
    run.final_coarse = forward_scatter(run.alpha, run.tm, run.grids.detector, method)
    run.final = forward_scatter(run.alpha, run.tm, run.grids.fine, method)
    fine = run.grids.fine
    inside = np.linalg.norm(fine.centers, axis=1) <= fine.q_max * (1 + 1e-9)
    run.spectra["aperture"] = eels_spectrum(run.final, run.energies, inside)
    run.spectra["all"] = eels_spectrum(run.final, run.energies)
    for name, final in (("detector", run.final_coarse), ("fine", run.final)):
        run.eels_maps[name] = _mode_energy_maps(run, final, cfg.analysis["eels_method"])
    centres = cfg.analysis["regions"]
    modes = None
    if centres is None and run.target_q is not None:
        centres = run.target_q
        modes = list(run.target.modes)
    if centres is not None:
        radius = cfg.analysis["region_radius_pitch"] * run.grids.detector.pitch
        run.fractions = fraction_matrix(run.final, centres, radius, modes,
                                        cfg.analysis["normalization"])
    return run


def _mode_energy_maps(run: Run, final: FinalState, method: str) -> np.ndarray:
    """Gamma(Q_f, omega_m) at every mode energy, shape (n_modes, n_pixels)."""
    basis = run.basis
    if method == "momentum":
        # same as eels_map(method="momentum"), reusing the scattered amplitudes
        g = basis.g_lorentz(basis.omega)
        return (g / basis.weight) @ (np.abs(final.amplitudes) ** 2)
    return np.array([eels_map(run.alpha, basis, float(w), final.grid, method=method)
                     for w in basis.omega])
