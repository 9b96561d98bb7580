"""Forward inelastic scattering, momentum-resolved EELS and incident-beam shaping.

Amplitudes follow the linear relation

    alpha_f(Q_f, n) = sum_i M_n(Q_f - Q_i) alpha_i(Q_i) dQ_i

between incident pixels Q_i and detector pixels Q_f.  Because M depends on
the difference only, it is sampled once on a square "difference lattice"
whose pitch divides every grid pitch involved; incident and detector grids
must therefore have commensurate pitches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
from scipy.signal import fftconvolve

from .grid import ComplexField, PixelGrid, ResolutionError, disk_lattice_counts, make_disk_grid
from .modes import ModeBasis, ProfileFrame, default_frame, sample_profiles
from .units import UNITS, BeamConfig, ParameterError

__all__ = [
    "DimensionError",
    "DegenerateSystemError",
    "ShapingGrids",
    "make_shaping_grids",
    "common_pitch",
    "TransferMatrixSampled",
    "FinalState",
    "forward_scatter",
    "eels_map",
    "eels_spectrum",
    "angle_integrated_loss",
    "render_incident",
    "SelectMode",
    "Entangle",
    "InversionSystem",
    "InversionResult",
    "build_inversion_system",
    "solve_incident",
    "FractionMatrix",
    "fraction_matrix",
]

log = logging.getLogger(__name__)

_MAX_DEN = 16
_RATIO_TOL = 1e-9
_SNAP_TOL = 2e-4
_HINT = " (try a larger incident aperture phi_i or fewer targets)"


class DimensionError(ValueError):
    """Grids or arrays whose shapes or pitches do not fit together."""


class DegenerateSystemError(ArithmeticError):
    """Every singular value of the inversion system fell below the cutoff."""


# ------------------------------------------------------------------ grids


def _ratio(a: float, b: float, tol: float = _RATIO_TOL) -> Fraction | None:
    """a / b as a small fraction, or None when it is not one."""
    fr = Fraction(a / b).limit_denominator(_MAX_DEN)
    if fr == 0 or abs(float(fr) - a / b) > tol * (a / b):
        return None
    return fr


def common_pitch(*pitches: float) -> float | None:
    """Largest pitch dividing all ``pitches`` (up to small rationals), else None."""
    base = pitches[0]
    den = 1
    for p in pitches[1:]:
        fr = _ratio(p, base)
        if fr is None:
            return None
        den = math.lcm(den, fr.denominator)
    # base / den divides every pitch; coarsen by the gcd of the integer multiples
    mults = [round(p / (base / den)) for p in pitches]
    g = 0
    for m in mults:
        g = math.gcd(g, m)
    return base / den * g


@dataclass(frozen=True, eq=False)
class ShapingGrids:
    """Incident grid, detector grid and the finer analysis grid on the detector."""

    incident: PixelGrid
    detector: PixelGrid
    fine: PixelGrid

    @property
    def pitch(self) -> float:
        p = common_pitch(self.incident.pitch, self.detector.pitch, self.fine.pitch)
        if p is None:
            raise DimensionError("grid pitches are not commensurate")
        return p

    def describe(self) -> dict:
        return {
            "incident": self.incident.describe(),
            "detector": self.detector.describe(),
            "fine": self.fine.describe(),
            "difference_pitch": self.pitch,
        }


def _snapped(grid: PixelGrid, detector: PixelGrid) -> PixelGrid | None:
    """``grid`` with its pitch set to the nearby exact rational multiple of the
    detector pitch, or None.  Apertures set by sin(phi) make nominal ratios
    miss small fractions by up to ~phi^2; the pixel set is kept unchanged."""
    fr = _ratio(grid.pitch, detector.pitch, _SNAP_TOL)
    if fr is None:
        return None
    return PixelGrid(grid.q_max, detector.pitch * fr.numerator / fr.denominator, grid.index)


def _commensurate_incident(q_max: float, target: int, detector: PixelGrid) -> PixelGrid:
    if target <= 1 or detector.n <= 1:
        return make_disk_grid(q_max, target)
    first = _snapped(make_disk_grid(q_max, target), detector)
    if first is not None:
        return first
    kmax = int(math.ceil(math.sqrt(2 * target / math.pi))) + 2
    r2, counts = disk_lattice_counts(kmax)
    order = np.argsort(np.abs(counts - target), kind="stable")
    for k in order:
        if r2[k] == 0 or abs(counts[k] - target) > 0.5 * target:
            continue
        grid = _snapped(make_disk_grid(q_max, int(counts[k])), detector)
        if grid is not None:
            log.info("incident grid adjusted to %d pixels for a commensurate pitch", grid.n)
            return grid
    raise DimensionError(
        f"no incident pixelation near {target} pixels is commensurate with the detector pitch"
    )


def _fine_factor(detector: PixelGrid, incident: PixelGrid, lo: int = 4, hi: int = 8) -> int:
    """Refinement in [lo, hi] that keeps the difference lattice coarsest."""
    best, best_p = lo, -1.0
    for f in range(lo, hi + 1):
        p = common_pitch(incident.pitch, detector.pitch / f)
        if p is not None and p > best_p * (1 + 1e-9):
            best, best_p = f, p
    return best


def make_shaping_grids(beam: BeamConfig, fine_factor: int | None = None) -> ShapingGrids:
    """Pixelate the incident and detector apertures of ``beam``.

    The detector grid follows ``beam.n_pixels_f`` exactly; the incident count
    is moved to the nearest one whose pitch is commensurate with the
    detector pitch.  ``fine`` refines the detector pitch by ``fine_factor``
    (chosen automatically when None) and is used for region integrals.
    """
    detector = make_disk_grid(beam.q_max_f, beam.n_pixels_f)
    incident = _commensurate_incident(beam.q_max_i, beam.n_pixels_i, detector)
    if fine_factor is None:
        fine_factor = _fine_factor(detector, incident)
    fine = detector.refined(fine_factor) if detector.n > 1 else detector
    return ShapingGrids(incident, detector, fine)


def _lattice_coords(grid: PixelGrid, pitch: float) -> np.ndarray:
    ratio = grid.pitch / pitch
    r = round(ratio)
    if abs(ratio - r) > 1e-7 * max(ratio, 1.0):
        raise DimensionError(f"grid pitch {grid.pitch:.6g} is not a multiple of {pitch:.6g}")
    return grid.index * r


# -------------------------------------------------------- transfer matrix


@dataclass(frozen=True, eq=False)
class TransferMatrixSampled:
    """M_n sampled on the difference lattice Q = pitch (kx, ky), |kx|, |ky| <= half.

    ``values[n, ky + half, kx + half]``; lattice points outside the disk of
    needed differences hold zeros.
    """

    labels: tuple[str, ...]
    pitch: float
    half: int
    values: np.ndarray
    omega: np.ndarray
    gamma: np.ndarray
    weight: np.ndarray
    hbar_v: float
    kind: str = "plasmon"
    method: str = "analytic"

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @classmethod
    def build(cls, basis: ModeBasis, incident: PixelGrid, *detectors: PixelGrid,
              method: str = "analytic", frame: ProfileFrame | None = None) -> TransferMatrixSampled:
        """Sample M_n on every difference between ``incident`` and the ``detectors``.

        ``method="analytic"`` uses the closed forms, ``"fourier"`` transforms
        sampled profiles (``frame``, built on demand).
        """
        if not detectors:
            raise DimensionError("at least one detector grid is required")
        pitch = common_pitch(incident.pitch, *[d.pitch for d in detectors])
        if pitch is None:
            raise DimensionError(
                "incident pitch {:.6g} and detector pitches {} are incommensurate".format(
                    incident.pitch, ", ".join(f"{d.pitch:.6g}" for d in detectors))
            )
        ri = _lattice_coords(incident, pitch)
        kf = max(int(np.abs(_lattice_coords(d, pitch)).max()) for d in detectors)
        half = int(np.abs(ri).max()) + kf
        reach = (incident.q_max + max(d.q_max for d in detectors)) / pitch + 1.5
        ax = np.arange(-half, half + 1)
        ky, kx = np.meshgrid(ax, ax, indexing="ij")
        inside = kx**2 + ky**2 <= reach**2
        q = pitch * np.stack([kx[inside], ky[inside]], axis=1).astype(float)
        if method == "analytic":
            m = basis.transfer(q)
        elif method == "fourier":
            if frame is None:
                e0, s0 = default_frame(basis, float(np.abs(q).max()))
                frame = sample_profiles(basis, e0, s0)
            big = frame.fourier_lattice(pitch, ax, ax) * basis.prefactor[:, None, None]
            m = big[:, inside].T
        else:
            raise ParameterError(f"unknown transfer method {method!r}")
        values = np.zeros((basis.n_modes, 2 * half + 1, 2 * half + 1), dtype=complex)
        values[:, inside] = m.T
        if not np.all(np.isfinite(values)):
            raise ArithmeticError("non-finite transfer amplitudes")
        return cls(
            labels=tuple(basis.labels), pitch=pitch, half=half, values=values,
            omega=basis.omega.copy(), gamma=basis.gamma.copy(), weight=basis.weight.copy(),
            hbar_v=basis.hbar_v, kind=basis.kind, method=method,
        )

    def coords(self, grid: PixelGrid) -> np.ndarray:
        return _lattice_coords(grid, self.pitch)

    def block(self, detector: PixelGrid, incident: PixelGrid) -> np.ndarray:
        """M_n(Q_f - Q_i) for every pair, shape (n_modes, n_f, n_i)."""
        rf, ri = self.coords(detector), self.coords(incident)
        d = rf[:, None, :] - ri[None, :, :] + self.half
        if d.min(initial=0) < 0 or d.max(initial=0) > 2 * self.half:
            raise DimensionError("difference lattice does not cover these grids")
        return self.values[:, d[..., 1], d[..., 0]]

    def at(self, q) -> np.ndarray:
        """Stored values at lattice wave vectors ``q`` (P, 2), shape (P, n_modes)."""
        k = np.rint(np.atleast_2d(q) / self.pitch).astype(int) + self.half
        return self.values[:, k[:, 1], k[:, 0]].T

    def select(self, idx) -> TransferMatrixSampled:
        idx = np.asarray(idx, dtype=int)
        return TransferMatrixSampled(
            labels=tuple(self.labels[i] for i in idx), pitch=self.pitch, half=self.half,
            values=self.values[idx], omega=self.omega[idx], gamma=self.gamma[idx],
            weight=self.weight[idx], hbar_v=self.hbar_v, kind=self.kind, method=self.method,
        )


# ------------------------------------------------------------ forward

@dataclass(frozen=True, eq=False)
class FinalState:
    """Scattered amplitudes alpha_f(Q_f, n), ``amplitudes[n, f]``."""

    grid: PixelGrid
    amplitudes: np.ndarray
    labels: tuple[str, ...]
    omega: np.ndarray
    weight: np.ndarray
    gamma: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def field(self, n: int) -> ComplexField:
        return ComplexField(self.grid, self.amplitudes[n])

    def probability(self) -> np.ndarray:
        """Per-mode scattered probability sum_f |alpha_f|^2 dQ."""
        return (np.abs(self.amplitudes) ** 2).sum(1) * self.grid.area

    @property
    def total(self) -> float:
        return float(self.probability().sum())


def forward_scatter(alpha_i: ComplexField, tm: TransferMatrixSampled, detector: PixelGrid,
                    method: str = "direct") -> FinalState:
    """alpha_f = sum_i M(Q_f - Q_i) alpha_i dQ_i on ``detector``.

    ``method="direct"`` gathers the pair block and multiplies; ``"fft"``
    convolves on the difference lattice.
    """
    incident = alpha_i.grid
    if method == "direct":
        blk = tm.block(detector, incident)
        amps = blk @ (alpha_i.values * incident.area)
    elif method == "fft":
        ri = tm.coords(incident)
        rf = tm.coords(detector)
        ki = int(np.abs(ri).max())
        if int(np.abs(rf).max()) + ki > tm.half:
            raise DimensionError("difference lattice does not cover these grids")
        a = np.zeros((2 * ki + 1, 2 * ki + 1), dtype=complex)
        a[ri[:, 1] + ki, ri[:, 0] + ki] = alpha_i.values * incident.area
        amps = np.empty((tm.n_modes, detector.n), dtype=complex)
        off = tm.half + ki
        for n in range(tm.n_modes):
            conv = fftconvolve(tm.values[n], a, mode="full")
            amps[n] = conv[rf[:, 1] + off, rf[:, 0] + off]
    else:
        raise ParameterError(f"unknown forward method {method!r}")
    final = FinalState(detector, amps, tm.labels, tm.omega, tm.weight, tm.gamma,
                       info={"method": method})
    if final.total > 0.1 * max(alpha_i.norm2(), 1e-300):
        log.warning("scattered probability %.3g exceeds 10%% of the incident norm; "
                    "first-order treatment is questionable", final.total)
    return final


# ------------------------------------------------------------------ EELS


def _g(basis_like, omega, spectral: str) -> np.ndarray:
    if spectral == "exact":
        return basis_like.g(omega)
    if spectral == "lorentz":
        return basis_like.g_lorentz(omega)
    raise ParameterError(f"unknown spectral model {spectral!r}")


def render_incident(alpha_i: ComplexField, x: np.ndarray) -> np.ndarray:
    """psi_i(R) on the square grid x (as rows y, columns x), values[iy, ix]."""
    grid = alpha_i.grid
    k = grid.half_width
    lat = alpha_i.as_lattice() * grid.area / (2 * math.pi)
    e = np.exp(1j * grid.pitch * np.outer(x, np.arange(-k, k + 1)))
    return e @ lat @ e.T


def eels_map(alpha_i: ComplexField, basis: ModeBasis, omega: float, detector: PixelGrid,
             tm: TransferMatrixSampled | None = None, method: str = "realspace",
             frame: ProfileFrame | None = None, spectral: str | None = None) -> np.ndarray:
    """Momentum-resolved loss probability Gamma(Q_f, omega) per detector pixel (nm^2 / eV).

    ``method="realspace"`` evaluates
        e^2 / (4 pi^3 v^2) sum_n g_n |\\int d^2R psi_i exp(-i Q_f.R) w_n|^2
    with sampled profiles (exact g by default); ``"momentum"`` uses
    sum_n g_n / G_n |alpha_f(Q_f, n)|^2 from :func:`forward_scatter`
    (Lorentzian g by default).
    """
    if not omega > 0:
        raise ParameterError("omega must be positive")
    if method == "momentum":
        if tm is None:
            tm = TransferMatrixSampled.build(basis, alpha_i.grid, detector)
        final = forward_scatter(alpha_i, tm, detector)
        g = _g(basis, omega, spectral or "lorentz")
        return (g / basis.weight) @ (np.abs(final.amplitudes) ** 2)
    if method != "realspace":
        raise ParameterError(f"unknown EELS method {method!r}")
    q_top = alpha_i.grid.q_max + detector.q_max
    if frame is None:
        e0, s0 = default_frame(basis, q_top)
        frame = sample_profiles(basis, e0, s0)
    if frame.spacing * q_top > math.pi:
        raise ResolutionError(
            f"profile spacing {frame.spacing:.4g} nm aliases wave vectors up to {q_top:.4g} nm^-1"
        )
    psi = render_incident(alpha_i, frame.x)
    k = detector.half_width
    ax = np.arange(-k, k + 1)
    ft = frame.fourier_lattice(detector.pitch, ax, ax, weight=psi)
    ix, iy = detector.index.T
    overlap = ft[:, iy + k, ix + k]  # (n_modes, n_f)
    g = _g(basis, omega, spectral or "exact")
    pref = UNITS.e2 / (4 * math.pi**3 * basis.hbar_v**2)
    return pref * (g @ (np.abs(overlap) ** 2))


def eels_spectrum(final: FinalState, omegas, region: np.ndarray | None = None,
                  basis: ModeBasis | None = None, spectral: str = "lorentz") -> np.ndarray:
    """Loss spectrum sum_{Q_f in region} sum_n g_n(omega) / G_n |alpha_f|^2 dQ_f (1/eV).

    ``region`` is a boolean mask over the final-state grid (all pixels when
    None).  Lorentzian g is built from the stored (omega_n, gamma_n, G_n);
    pass ``basis`` with ``spectral="exact"`` for the exact spectral functions.
    """
    from .bem import g_lorentzian

    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    mask = np.ones(final.grid.n, bool) if region is None else np.asarray(region, bool)
    if mask.shape != (final.grid.n,):
        raise DimensionError("region mask does not match the final-state grid")
    pops = (np.abs(final.amplitudes[:, mask]) ** 2).sum(1) * final.grid.area
    if spectral == "exact":
        if basis is None:
            raise ParameterError("exact spectral functions need the mode basis")
        g = basis.g(omegas)
    else:
        g = g_lorentzian(final.omega, final.gamma, final.weight, omegas)
    return g @ (pops / final.weight)


def angle_integrated_loss(alpha_i: ComplexField, basis: ModeBasis, omega: float,
                          frame: ProfileFrame | None = None, spectral: str = "exact") -> float:
    """e^2 / (pi v^2) sum_n g_n(omega) \\int d^2R |psi_i|^2 |w_n|^2 (1/eV).

    The incoherent average over all detector angles; ``frame`` must cover
    the region where |w_n| is non-negligible.
    """
    if frame is None:
        e0, s0 = default_frame(basis, alpha_i.grid.q_max)
        frame = sample_profiles(basis, e0, s0)
    psi2 = np.abs(render_incident(alpha_i, frame.x)) ** 2
    ints = np.array([(psi2 * np.abs(w) ** 2).sum() for w in frame.values]) * frame.spacing**2
    g = _g(basis, omega, spectral)
    return float(UNITS.e2 / (math.pi * basis.hbar_v**2) * (g @ ints))


# ----------------------------------------------------------- inversion


@dataclass(frozen=True)
class SelectMode:
    """Excite only ``modes`` (0-based), with uniform amplitude over the detector disk."""

    modes: tuple[int, ...]
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        if len(self.modes) == 0:
            raise ParameterError("SelectMode needs at least one mode")
        if len(set(self.modes)) != len(self.modes):
            raise ParameterError("SelectMode modes must be distinct")


@dataclass(frozen=True)
class Entangle:
    """Mode ``pairs[j][0]`` scattered into detector pixel ``pairs[j][1]`` (both 0-based)."""

    pairs: tuple[tuple[int, int], ...]
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        if len(self.pairs) == 0:
            raise ParameterError("Entangle needs at least one (mode, pixel) pair")
        modes = [p[0] for p in self.pairs]
        pixels = [p[1] for p in self.pairs]
        if len(set(modes)) != len(modes) or len(set(pixels)) != len(pixels):
            raise ParameterError("Entangle pairs need distinct modes and distinct pixels")

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(p[0] for p in self.pairs)


@dataclass(frozen=True, eq=False)
class InversionSystem:
    """A[(n, f), i] = M_n(Q_f - Q_i) dQ_i with rows ordered mode-major (row = n * n_f + f)."""

    matrix: np.ndarray
    rhs: np.ndarray
    incident: PixelGrid
    detector: PixelGrid
    n_modes: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def build_inversion_system(tm: TransferMatrixSampled, incident: PixelGrid, detector: PixelGrid,
                           target) -> InversionSystem:
    """Assemble the linear system whose solution shapes the incident beam.

    The right-hand side holds the target amplitude on the requested
    (mode, pixel) entries and zero elsewhere, scaled to unit norm.
    """
    n_modes, n_f = tm.n_modes, detector.n
    b = np.zeros((n_modes, n_f), dtype=complex)
    if isinstance(target, SelectMode):
        for n in target.modes:
            if not 0 <= n < n_modes:
                raise ParameterError(f"target mode {n + 1} not in the {n_modes}-mode basis")
            b[n, :] = target.amplitude
    elif isinstance(target, Entangle):
        for n, f in target.pairs:
            if not 0 <= n < n_modes:
                raise ParameterError(f"target mode {n + 1} not in the {n_modes}-mode basis")
            if not 0 <= f < n_f:
                raise ParameterError(f"target pixel {f} outside the {n_f}-pixel detector")
            b[n, f] = target.amplitude
    else:
        raise ParameterError(f"unsupported target {target!r}")
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ParameterError("target is empty")
    a = tm.block(detector, incident) * incident.area  # (n_modes, n_f, n_i)
    return InversionSystem(a.reshape(n_modes * n_f, incident.n), (b / nb).ravel(),
                           incident, detector, n_modes)


@dataclass(frozen=True, eq=False)
class InversionResult:
    """Shaped incident beam and solver diagnostics.

    ``raw`` is the least-squares solution before normalisation, ``alpha``
    the same field scaled to unit probability.
    """

    alpha: ComplexField
    raw: np.ndarray
    residual: float
    singular_values: np.ndarray
    rank: int
    cutoff: float
    tikhonov: float

    @property
    def condition(self) -> float:
        s = self.singular_values
        return float(s[0] / s[self.rank - 1])

    def diagnostics(self) -> dict:
        return {
            "residual": self.residual,
            "rank": self.rank,
            "n_singular": int(len(self.singular_values)),
            "sigma_max": float(self.singular_values[0]),
            "sigma_min_kept": float(self.singular_values[self.rank - 1]),
            "condition_kept": self.condition,
            "svd_cutoff": self.cutoff,
            "tikhonov": self.tikhonov,
            "raw_norm2": float(np.sum(np.abs(self.raw) ** 2) * self.alpha.grid.area),
        }


def solve_incident(system: InversionSystem, svd_cutoff: float = 1e-8,
                   tikhonov: float = 0.0) -> InversionResult:
    """Truncated-SVD (optionally Tikhonov-damped) least-squares incident amplitudes.

    Singular values below ``svd_cutoff * s_max`` are dropped; ``tikhonov``
    adds mu ||x||^2 with mu = tikhonov * s_max^2.  Coefficients live on the
    incident disk only.  The residual ||Ax - b|| / ||b|| refers to the
    unnormalised solution.
    """
    a, b = system.matrix, system.rhs
    if a.size == 0:
        raise DimensionError("empty inversion system")
    if not svd_cutoff > 0 or tikhonov < 0:
        raise ParameterError("svd_cutoff must be positive and tikhonov non-negative")
    try:
        u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
    if s.size == 0 or s[0] == 0:
        raise DegenerateSystemError("inversion matrix is zero" + _HINT)
    keep = s >= svd_cutoff * s[0]
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise DegenerateSystemError("all singular values fall below the cutoff" + _HINT)
    mu = tikhonov * s[0] ** 2
    sk = s[keep]
    filt = sk / (sk**2 + mu)
    x = vh[keep].conj().T @ (filt * (u[:, keep].conj().T @ b))
    resid = float(np.linalg.norm(a @ x - b) / np.linalg.norm(b))
    field_ = ComplexField(system.incident, x)
    if field_.norm2() == 0:
        raise DegenerateSystemError("solution vanishes identically" + _HINT)
    log.info("inversion: %dx%d, rank %d, residual %.3e", *a.shape, rank, resid)
    if resid > 1e-3:
        log.warning("target not reached: relative residual %.3g%s", resid, _HINT)
    return InversionResult(field_.normalized(), x, resid, s, rank, svd_cutoff, tikhonov)


# ------------------------------------------------------------ fractions


@dataclass(frozen=True, eq=False)
class FractionMatrix:
    """Detection probabilities P(j, n) in disk regions j for modes n."""

    centers: np.ndarray
    radius: float
    labels: tuple[str, ...]
    raw: np.ndarray
    values: np.ndarray
    normalization: str
    status: str = "ok"

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)


def fraction_matrix(final: FinalState, centers, radius: float, modes=None,
                    normalization: str = "region") -> FractionMatrix:
    """Probability of detecting mode n inside the disk of ``radius`` around ``centers[j]``.

    ``normalization="region"`` makes each row sum to 1, ``"global"`` the
    whole matrix.  A field with no signal yields NaN entries and status
    ``"no signal"``.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if not radius > 0:
        raise ParameterError("region radius must be positive")
    modes = list(range(final.n_modes)) if modes is None else [int(m) for m in modes]
    q = final.grid.centers
    raw = np.zeros((len(centers), len(modes)))
    for j, c in enumerate(centers):
        inside = np.linalg.norm(q - c, axis=1) <= radius * (1 + 1e-9)
        if not np.any(inside):
            raise ParameterError(f"region {j} around {tuple(c)} contains no pixels")
        raw[j] = (np.abs(final.amplitudes[modes][:, inside]) ** 2).sum(1) * final.grid.area
    labels = tuple(final.labels[m] for m in modes)
    if normalization == "region":
        tot = raw.sum(1, keepdims=True)
    elif normalization == "global":
        tot = np.full((1, 1), raw.sum())
    else:
        raise ParameterError(f"unknown normalization {normalization!r}")
    if np.any(tot == 0):
        nan = np.full_like(raw, np.nan)
        return FractionMatrix(centers, radius, labels, raw, nan, normalization, "no signal")
    return FractionMatrix(centers, radius, labels, raw, raw / tot, normalization)
