"""Mode bases: spectral functions, spatial profiles and transfer matrices.

A :class:`ModeBasis` bundles, for each sample mode n, its energy, width
and spectral weight G_n together with two evaluators:

* ``profile(R)``  - the transverse coupling profile w_n(R, omega_n) (nm^1/2),
* ``transfer(Q)`` - the transfer amplitude M_n(Q) (nm^2).

They are tied together by

    M_n(Q) = e / (4 pi^2 v) sqrt(G_n / pi) \\int d^2R exp(-i Q.R) w_n(R),

with the sign of the exponent chosen so that the momentum-space amplitude
sum_i M_n(Q_f - Q_i) alpha_i dQ reproduces the real-space overlap
\\int d^2R psi_i(R) exp(-i Q_f.R) w_n(R) of the loss probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .bem import PlasmonModeSet, g_lorentzian, g_plasmon
from .special import bessel_kn_upward
from .grid import ResolutionError
from .units import UNITS, ParameterError

__all__ = [
    "ModeBasis",
    "PlasmonBasis",
    "w_plasmon",
    "m_plasmon",
    "mode_strength",
    "kernel_ft",
    "plasmon_basis",
    "ProfileFrame",
    "sample_profiles",
    "m_from_w",
]

_CHUNK = 4096


def kernel_ft(kappa: np.ndarray, delta) -> np.ndarray:
    """2D Fourier transform of K0(q sqrt(R^2 + delta^2)) at |Q| with kappa = sqrt(Q^2 + q^2).

    Equals 2 pi delta K1(delta kappa) / kappa, tending to 2 pi / kappa^2 as delta -> 0.
    """
    delta = np.asarray(delta, dtype=float)
    if np.all(delta == 0):
        return 2 * math.pi / kappa**2
    x = delta * kappa
    return 2 * math.pi * delta * sp.k1(x) / kappa


class ModeBasis:
    """Common interface of plasmonic and vibrational mode sets."""

    kind = "abstract"
    hbar_v: float
    labels: list[str]

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    @property
    def omega(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def gamma(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def weight(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def q_long(self) -> np.ndarray:
        """omega_n / v for every mode (nm^-1)."""
        return self.omega / self.hbar_v

    @property
    def prefactor(self) -> np.ndarray:
        """e / (4 pi^2 v) sqrt(G_n / pi), linking w_n to M_n."""
        return UNITS.e / (4 * math.pi**2 * self.hbar_v) * np.sqrt(self.weight / math.pi)

    def g(self, omega) -> np.ndarray:
        """Exact spectral functions, shape (..., n_modes)."""
        raise NotImplementedError

    def g_lorentz(self, omega) -> np.ndarray:
        return g_lorentzian(self.omega, self.gamma, self.weight, omega)

    def profile(self, points) -> np.ndarray:
        """w_n(R, omega_n) at transverse points (P, 2), shape (P, n_modes)."""
        raise NotImplementedError

    def transfer(self, q) -> np.ndarray:
        """M_n(Q) at wave vectors (P, 2), shape (P, n_modes)."""
        raise NotImplementedError

    def extent(self) -> tuple[np.ndarray, float]:
        """Centre and radius of the region holding the sample's charges."""
        raise NotImplementedError

    def groups(self, tol: float = 1e-3) -> list[list[int]]:
        from .bem import degeneracy_groups

        order = np.argsort(self.omega, kind="stable")
        return [[int(order[k]) for k in g] for g in degeneracy_groups(self.omega[order], tol)]

    def describe(self) -> list[dict]:
        return [
            {"label": lab, "omega_eV": float(w), "gamma_eV": float(g), "G_eV": float(G)}
            for lab, w, g, G in zip(self.labels, self.omega, self.gamma, self.weight)
        ]


# ---------------------------------------------------------------- plasmons


@dataclass(frozen=True, eq=False)
class PlasmonBasis(ModeBasis):
    """Plasmon modes of a BEM mode set seen by a beam of speed ``hbar_v`` (eV nm).

    ``regularize`` smooths |R - S| -> sqrt(|R - S|^2 + d_s^2) with d_s the
    radius of each boundary element.
    """

    modes: PlasmonModeSet
    hbar_v: float
    regularize: bool = True

    kind = "plasmon"

    def __post_init__(self) -> None:
        if self.modes.drude is None:
            raise ValueError("plasmon basis needs Drude-dressed modes")

    @property
    def labels(self) -> list[str]:
        return [f"plasmon{k + 1}" for k in range(self.n_modes)]

    @property
    def omega(self) -> np.ndarray:
        return self.modes.omega

    @property
    def gamma(self) -> np.ndarray:
        return self.modes.gamma

    @property
    def weight(self) -> np.ndarray:
        return self.modes.weight

    def g(self, omega) -> np.ndarray:
        return g_plasmon(self.modes, omega)

    @property
    def _delta(self) -> np.ndarray:
        mesh = self.modes.mesh
        return mesh.element_radius if self.regularize else np.zeros(mesh.n)

    @property
    def charges(self) -> np.ndarray:
        """a_j sigma_jn exp(i q_n z_j), shape (n_elements, n_modes)."""
        mesh = self.modes.mesh
        phase = np.exp(1j * np.outer(mesh.centroids[:, 2], self.q_long))
        return mesh.areas[:, None] * self.modes.sigma * phase

    def extent(self):
        s = self.modes.mesh.centroids[:, :2]
        centre = np.average(s, axis=0, weights=self.modes.mesh.areas)
        return centre, float(np.max(np.linalg.norm(s - centre, axis=1)))

    def profile(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        centre, radius = self.extent()
        delta = self._delta
        r_far = max(3.0 * radius, radius + 20 * float(delta.max(initial=0.0)))
        rho = np.linalg.norm(pts - centre, axis=1)
        far = rho > r_far
        out = np.empty((len(pts), self.n_modes), dtype=complex)
        if np.any(~far):
            out[~far] = self._profile_direct(pts[~far])
        if np.any(far):
            out[far] = self._profile_multipole(pts[far], centre, r_far)
        return out

    def _profile_direct(self, pts: np.ndarray) -> np.ndarray:
        s = self.modes.mesh.centroids[:, :2]
        d2 = self._delta**2
        c = self.charges
        q = self.q_long
        out = np.empty((len(pts), self.n_modes), dtype=complex)
        for start in range(0, len(pts), _CHUNK // 4):
            p = pts[start:start + _CHUNK // 4]
            r = np.sqrt(((p[:, None, :] - s[None]) ** 2).sum(-1) + d2)
            for n in range(self.n_modes):
                out[start:start + len(p), n] = 2 * sp.k0(q[n] * r) @ c[:, n]
        return out

    def _profile_multipole(self, pts: np.ndarray, centre, r_far: float) -> np.ndarray:
        # Graf: K0(q|R - S|) = sum_m I_m(q s) K_m(q rho) exp(i m (phi_R - phi_S)), rho > s.
        # The O(d^2 / rho^2) tail of the regularisation is neglected out here.
        s = self.modes.mesh.centroids[:, :2] - centre
        s_abs = np.linalg.norm(s, axis=1)
        s_phi = np.arctan2(s[:, 1], s[:, 0])
        radius = float(s_abs.max())
        rel = pts - centre
        rho = np.linalg.norm(rel, axis=1)
        phi = np.arctan2(rel[:, 1], rel[:, 0])
        c = self.charges
        out = np.empty((len(pts), self.n_modes), dtype=complex)
        # radial bands, each with the truncation order its inner radius needs
        edges = [r_far * 2.0**k for k in range(4)] + [np.inf]
        for lo, hi in zip(edges[:-1], edges[1:]):
            band = np.flatnonzero((rho > lo * (1 - 1e-12)) & (rho <= hi)) if np.isfinite(hi) \
                else np.flatnonzero(rho > lo)
            if band.size == 0:
                continue
            ratio = min(max(radius / lo, 1e-3), 0.99)
            m_max = int(min(80, max(4, math.ceil(math.log(1e-15) / math.log(ratio)))))
            ms = np.arange(m_max + 1)
            ems = np.exp(-1j * np.outer(s_phi, ms))
            i_m = [sp.iv(ms[None, :], qn * s_abs[:, None]) for qn in self.q_long]
            # c_plus[m] multiplies exp(+i m phi), c_minus[m] exp(-i m phi); I_-m = I_m
            c_plus = np.stack([(c[:, n, None] * i_m[n] * ems).sum(0) for n in range(self.n_modes)])
            c_minus = np.stack([(c[:, n, None] * i_m[n] * ems.conj()).sum(0) for n in range(self.n_modes)])
            for start in range(0, band.size, _CHUNK):
                b = band[start:start + _CHUNK]
                emphi = np.exp(1j * np.outer(ms, phi[b]))  # (M+1, P)
                for n, qn in enumerate(self.q_long):
                    k_m = bessel_kn_upward(m_max, qn * rho[b])  # (M+1, P)
                    acc = c_plus[n] @ (k_m * emphi) + c_minus[n, 1:] @ (k_m[1:] * emphi[1:].conj())
                    out[b, n] = 2 * acc
        return out

    def transfer(self, q) -> np.ndarray:
        qv = np.atleast_2d(np.asarray(q, dtype=float))
        s = self.modes.mesh.centroids[:, :2]
        delta = self._delta
        c = self.charges
        pref = self.prefactor
        out = np.empty((len(qv), self.n_modes), dtype=complex)
        for start in range(0, len(qv), _CHUNK // 4):
            qq = qv[start:start + _CHUNK // 4]
            phase = np.exp(-1j * (qq @ s.T))  # (P, N)
            q2 = (qq**2).sum(1)
            for n, qn in enumerate(self.q_long):
                kappa = np.sqrt(q2 + qn**2)[:, None]
                f = kernel_ft(kappa, delta[None, :])
                out[start:start + len(qq), n] = pref[n] * 2 * ((phase * f) @ c[:, n])
        return out

    def select(self, idx) -> PlasmonBasis:
        return PlasmonBasis(self.modes.select(idx), self.hbar_v, self.regularize)


def w_plasmon(basis: PlasmonBasis, points) -> np.ndarray:
    """w_n(R) = 2 \\oint ds sigma_n(s) exp(i omega_n s_z / v) K0(omega_n |R - S| / v)."""
    return basis.profile(points)


def m_plasmon(basis: PlasmonBasis, q) -> np.ndarray:
    """Closed-form transfer amplitudes M_n(Q), omega frozen at omega_n."""
    return basis.transfer(q)


def mode_strength(basis: ModeBasis) -> np.ndarray:
    """Angle-integrated loss weight G_n \\int d^2R |w_n|^2 for uniform illumination (eV nm^3).

    Uses \\int d^2R K0(q|R - a|) K0(q|R - b|) = pi d K1(q d) / q with d = |a - b|
    and the d -> 0 limit pi / q^2; regularisation is ignored.
    """
    if not isinstance(basis, PlasmonBasis):
        raise TypeError("mode_strength is implemented for plasmon bases")
    s = basis.modes.mesh.centroids[:, :2]
    d = np.sqrt(((s[:, None] - s[None]) ** 2).sum(-1))
    c = basis.charges
    out = np.empty(basis.n_modes)
    for n, qn in enumerate(basis.q_long):
        with np.errstate(invalid="ignore", divide="ignore"):
            ker = np.where(d > 0, math.pi * d * sp.k1(qn * d) / qn, math.pi / qn**2)
        out[n] = 4 * np.real(np.conj(c[:, n]) @ ker @ c[:, n])
    return out * basis.weight


def plasmon_basis(
    mesh,
    hbar_v: float,
    n_modes: int = 5,
    drude=None,
    bright_only: bool = True,
    threshold: float = 1e-2,
    n_candidates: int | None = None,
    regularize: bool = True,
) -> PlasmonBasis:
    """Solve, dress and (optionally) keep only the ``n_modes`` lowest beam-bright modes.

    A mode is bright when its :func:`mode_strength` exceeds ``threshold``
    times the strongest candidate; modes odd under z -> -z couple to a
    normally incident beam only through the tiny phase q z and are
    filtered out.  Degenerate groups are never split.
    """
    from .bem import drude_dress, eigensolve

    if n_candidates is None:
        n_candidates = 3 * n_modes + 3 if bright_only else n_modes
    n_candidates = min(max(n_candidates, n_modes), mesh.n - 2)
    modes = drude_dress(eigensolve(mesh, n_candidates), drude)
    basis = PlasmonBasis(modes, hbar_v, regularize)
    if not bright_only:
        return basis.select(np.arange(min(n_modes, basis.n_modes)))
    strength = mode_strength(basis)
    bright = strength >= threshold * strength.max()
    keep: list[int] = []
    for grp in basis.groups():
        if len(keep) >= n_modes:
            break
        if np.any(bright[grp]):
            keep.extend(k for k in grp if bright[k])
    return basis.select(np.asarray(keep))


# ------------------------------------------------- sampled profiles, Fourier path


@dataclass(frozen=True, eq=False)
class ProfileFrame:
    """Profiles w_n sampled on a square real-space grid, ``values[n, iy, ix]``."""

    x: np.ndarray
    values: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def extent(self) -> float:
        return self.spacing * len(self.x)

    def fourier(self, q, weight: np.ndarray | None = None) -> np.ndarray:
        """\\int d^2R exp(-i Q.R) f(R) w_n(R) by midpoint quadrature, shape (P, n_modes).

        ``weight`` is an optional map f[iy, ix] multiplying every profile.
        """
        qv = np.atleast_2d(np.asarray(q, dtype=float))
        qmax = float(np.abs(qv).max(initial=0.0))
        if qmax * self.spacing > math.pi * (1 + 1e-12):
            raise ResolutionError(
                f"spacing {self.spacing:.4g} nm cannot resolve |Q| = {qmax:.4g} nm^-1"
            )
        out = np.empty((len(qv), self.values.shape[0]), dtype=complex)
        for p, (qx, qy) in enumerate(qv):
            ex = np.exp(-1j * qx * self.x)
            ey = np.exp(-1j * qy * self.x)
            f = self.values if weight is None else self.values * weight[None]
            out[p] = np.einsum("y,nyx,x->n", ey, f, ex)
        return out * self.spacing**2

    def fourier_lattice(self, pitch: float, kx, ky, weight: np.ndarray | None = None) -> np.ndarray:
        """Same transform on the lattice Q = pitch (kx, ky); shape (n_modes, len(ky), len(kx))."""
        kx = np.asarray(kx, dtype=float)
        ky = np.asarray(ky, dtype=float)
        qmax = pitch * max(np.abs(kx).max(initial=0.0), np.abs(ky).max(initial=0.0))
        if qmax * self.spacing > math.pi * (1 + 1e-12):
            raise ResolutionError(
                f"spacing {self.spacing:.4g} nm cannot resolve |Q| = {qmax:.4g} nm^-1"
            )
        ex = np.exp(-1j * pitch * np.outer(kx, self.x))  # (Kx, nx)
        ey = np.exp(-1j * pitch * np.outer(ky, self.x))  # (Ky, ny)
        out = np.empty((self.values.shape[0], len(ky), len(kx)), dtype=complex)
        for n, f in enumerate(self.values):
            if weight is not None:
                f = f * weight
            out[n] = ey @ f @ ex.T
        return out * self.spacing**2


def default_frame(basis: ModeBasis, q_top: float, decay: float = 6.0) -> tuple[float, float]:
    """Extent and spacing covering ``decay`` decay lengths v/omega beyond the sample
    and resolving wave vectors up to ``q_top``."""
    _, radius = basis.extent()
    extent = 2 * (radius + decay / float(np.min(basis.q_long)))
    spacing = min(0.25, 0.5 * math.pi / max(q_top, 1e-12))
    return extent, spacing


def sample_profiles(basis: ModeBasis, extent: float, spacing: float,
                    max_points: int = 40_000_000) -> ProfileFrame:
    """Evaluate every profile on an origin-centred grid of the given extent and spacing."""
    if not extent > 0 or not spacing > 0:
        raise ParameterError("extent and spacing must be positive")
    n = int(math.ceil(extent / spacing))
    if n * n > max_points:
        raise ResolutionError(
            f"profile grid of {n}x{n} points exceeds the limit of {max_points}; "
            "reduce the extent or coarsen the spacing"
        )
    x = -0.5 * n * spacing + spacing * (np.arange(n) + 0.5)
    xx, yy = np.meshgrid(x, x, indexing="xy")
    w = basis.profile(np.stack([xx.ravel(), yy.ravel()], axis=1))
    return ProfileFrame(x=x, values=np.ascontiguousarray(w.T.reshape(-1, n, n)))


def m_from_w(basis: ModeBasis, q, frame: ProfileFrame | None = None,
             extent: float | None = None, spacing: float | None = None) -> np.ndarray:
    """Transfer amplitudes by numerically Fourier transforming sampled profiles.

    Independent of the closed forms in ``basis.transfer``; used as their
    cross-check and for profiles known only on a grid.
    """
    qv = np.atleast_2d(np.asarray(q, dtype=float))
    if frame is None:
        e0, s0 = default_frame(basis, float(np.abs(qv).max(initial=1.0)))
        frame = sample_profiles(basis, extent or e0, spacing or s0)
    return frame.fourier(qv) * basis.prefactor[None, :]
