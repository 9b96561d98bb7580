"""Quasistatic boundary-element eigenmodes of homogeneous particles.

Surface-charge eigenmodes solve

    2 pi lambda sigma(s) = \\oint ds' F(s, s') sigma(s'),
    F(s, s') = -n(s).(s - s') / |s - s'|^3,

discretised by collocation at element centroids.  The discrete operator is
symmetrised in the Coulomb (single-layer) inner product
<sigma, sigma'> = \\oint\\oint sigma(s) sigma'(s') / |s - s'|, in which the
continuum operator is self-adjoint; this gives real eigenvalues and
eigenvectors that are exactly orthonormal in that inner product.  With this
normalisation the screened interaction separates as
Im{-W(r, r')} = sum_n g_n(omega) phi_n(r) phi_n(r'), phi_n being the
potential of sigma_n.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .mesh import SurfaceMesh

__all__ = [
    "Drude",
    "PlasmonModeSet",
    "NumericError",
    "assemble_operators",
    "eigensolve",
    "drude_dress",
    "g_plasmon",
    "g_lorentzian",
    "degeneracy_groups",
]

log = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-3  # eV


class NumericError(RuntimeError):
    """An iterative or dense numerical step failed to converge."""


@dataclass(frozen=True)
class Drude:
    """eps(w) = eps_b - wp^2 / (w (w + i gamma)); energies in eV."""

    eps_b: float = 4.0
    omega_p: float = 9.17
    gamma: float = 0.021

    def eps(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.eps_b - self.omega_p**2 / (omega * (omega + 1j * self.gamma))


# ---------------------------------------------------------------- assembly


def _self_potential(vertices: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """\\int_element dA / |c - s| for a flat polygon evaluated at its centroid c."""
    out = np.zeros(len(centroids))
    nv = vertices.shape[1]
    for e in range(nv):
        a = vertices[:, e]
        b = vertices[:, (e + 1) % nv]
        d = b - a
        length = np.linalg.norm(d, axis=1)
        ok = length > 1e-14
        t_hat = np.zeros_like(d)
        t_hat[ok] = d[ok] / length[ok, None]
        ta = np.einsum("ij,ij->i", a - centroids, t_hat)
        tb = np.einsum("ij,ij->i", b - centroids, t_hat)
        foot = a - ta[:, None] * t_hat
        h = np.linalg.norm(foot - centroids, axis=1)
        hs = np.where(h > 1e-14, h, 1.0)
        out += np.where(ok & (h > 1e-14), h * (np.arcsinh(tb / hs) - np.arcsinh(ta / hs)), 0.0)
    return out


def assemble_operators(mesh: SurfaceMesh, near: float = 3.0, diagonal: str = "closure"):
    """Discrete double-layer-adjoint operator ``K`` and Coulomb Gram matrix ``P``.

    ``(K sigma)_i`` approximates \\oint F(s_i, s') sigma(s') ds' and
    ``P_ij`` approximates \\int_i\\int_j ds ds' / |s - s'|.  Element pairs
    closer than ``near`` element sizes are integrated with the sub-element
    quadrature stored in the mesh.

    ``diagonal`` selects the self-term of ``K``: ``"closure"`` imposes the
    discrete Gauss law sum_i a_i K_ij = -2 pi a_j column by column,
    ``"flat"`` keeps the principal value of a flat element (zero).
    """
    c = mesh.centroids
    nrm = mesh.normals
    a = mesh.areas
    n = mesh.n
    diff = c[:, None, :] - c[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))
    np.fill_diagonal(dist, 1.0)
    inv = 1.0 / dist
    kmat = -np.einsum("ik,ijk->ij", nrm, diff) * inv**3 * a[None, :]
    pmat = inv * a[None, :]
    del diff

    if mesh.quad_points is not None:
        size = np.sqrt(a)
        close = dist < near * np.maximum(size[:, None], size[None, :])
        np.fill_diagonal(close, False)
        ii, jj = np.nonzero(close)
        for start in range(0, len(ii), 20000):
            i = ii[start:start + 20000]
            j = jj[start:start + 20000]
            pts = mesh.quad_points[j]  # (m, k, 3)
            w = mesh.quad_weights[j]
            d = c[i][:, None, :] - pts
            r = np.sqrt((d**2).sum(-1))
            kmat[i, j] = -(np.einsum("mk,mqk->mq", nrm[i], d) / r**3 * w).sum(-1)
            pmat[i, j] = (w / r).sum(-1)
    np.fill_diagonal(kmat, 0.0)
    if mesh.vertices is not None:
        self_pot = _self_potential(mesh.vertices, c)
    else:
        self_pot = 2 * math.pi * np.sqrt(a / math.pi)
    pmat[np.arange(n), np.arange(n)] = self_pot

    if diagonal == "closure":
        # Gauss law over the observation point: sum_i a_i F(s_i, s_j) = -2 pi
        kmat[np.arange(n), np.arange(n)] = (-2 * math.pi * a - a @ kmat) / a
    elif diagonal == "row":
        kmat[np.arange(n), np.arange(n)] = -2 * math.pi - kmat.sum(axis=1)
    elif diagonal != "flat":
        raise ValueError(f"unknown diagonal rule {diagonal!r}")
    # Coulomb Gram matrix: P_ij = a_i (potential at s_i of unit density on j)
    gram = a[:, None] * pmat
    gram = 0.5 * (gram + gram.T)
    return kmat, gram


# ---------------------------------------------------------------- modes


def degeneracy_groups(omega: np.ndarray, tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Chain modes (sorted by energy) whose neighbouring energies differ by < ``tol``."""
    groups: list[list[int]] = []
    for k, w in enumerate(omega):
        if groups and abs(w - omega[groups[-1][-1]]) < tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


@dataclass(frozen=True, eq=False)
class PlasmonModeSet:
    """Quasistatic surface-charge eigenmodes, optionally dressed with a Drude metal.

    ``sigma[:, n]`` is the surface charge density of mode n (nm^-3/2),
    normalised so that \\oint\\oint sigma_n sigma_m / |s - s'| = delta_nm.
    """

    mesh: SurfaceMesh
    lam: np.ndarray
    sigma: np.ndarray
    drude: Drude | None = None
    residual: float = 0.0
    asymmetry: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return len(self.lam)

    @property
    def omega(self) -> np.ndarray:
        d = self._need_drude()
        return d.omega_p / np.sqrt(d.eps_b + (1 - self.lam) / (1 + self.lam))

    @property
    def gamma(self) -> np.ndarray:
        return np.full(self.n_modes, self._need_drude().gamma)

    @property
    def weight(self) -> np.ndarray:
        """Lorentzian areas G_n = pi w_n^3 / (wp^2 (1 + lambda_n)) in eV."""
        d = self._need_drude()
        return math.pi * self.omega**3 / (d.omega_p**2 * (1 + self.lam))

    def groups(self, tol: float = DEGENERACY_TOL) -> list[list[int]]:
        if self.drude is None:
            # compare eigenvalues on a comparable scale when no metal is attached
            return degeneracy_groups(self.lam, tol * 1e-2)
        return degeneracy_groups(self.omega, tol)

    def gram(self) -> np.ndarray:
        """Coulomb Gram matrix of the stored eigenvectors."""
        _, p = assemble_operators(self.mesh)
        return self.sigma.T @ p @ self.sigma

    def charge_moments(self) -> np.ndarray:
        """\\oint ds sigma_n(s) s, shape (n_modes, 3)."""
        return (self.mesh.areas[:, None] * self.mesh.centroids).T @ self.sigma

    def select(self, idx) -> PlasmonModeSet:
        idx = np.asarray(idx, dtype=int)
        return replace(self, lam=self.lam[idx], sigma=self.sigma[:, idx])

    def _need_drude(self) -> Drude:
        if self.drude is None:
            raise ValueError("mode set has no dielectric model; call drude_dress first")
        return self.drude


def _align_degenerate(mesh: SurfaceMesh, gram: np.ndarray, lam: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Rotate each degenerate subspace onto eigenvectors of the y -> -y mirror."""
    perm = mesh.mirror_permutation(axis=1)
    if perm is None:
        return vec
    vec = vec.copy()
    for grp in degeneracy_groups(lam, 1e-6):
        if len(grp) < 2:
            continue
        sub = vec[:, grp]
        mir = sub.T @ gram @ sub[perm]  # matrix of the mirror in the subspace
        mir = 0.5 * (mir + mir.T)
        _, rot = np.linalg.eigh(mir)
        rot = rot[:, ::-1]  # even (x-like) first
        new = sub @ rot
        for k in range(new.shape[1]):
            # deterministic sign: largest-magnitude entry positive
            j = np.argmax(np.abs(new[:, k]))
            if new[j, k] < 0:
                new[:, k] = -new[:, k]
        vec[:, grp] = new
    return vec


def eigensolve(
    mesh: SurfaceMesh,
    n_modes: int = 10,
    near: float = 3.0,
    diagonal: str = "closure",
    drop_monopole: bool = True,
) -> PlasmonModeSet:
    """Lowest ``n_modes`` surface eigenmodes (most negative lambda first).

    Eigenvalues lie in (-1, 1); the charged monopole at lambda = -1 is dropped.
    Degenerate subspaces of a mirror-symmetric mesh are rotated onto mirror
    eigenstates (x-like first).
    """
    if n_modes < 1 or n_modes >= mesh.n:
        raise ValueError(f"n_modes must lie in [1, {mesh.n - 1}]")
    kmat, gram = assemble_operators(mesh, near=near, diagonal=diagonal)
    pk = gram @ kmat
    asym = float(np.linalg.norm(pk - pk.T) / np.linalg.norm(pk))
    h = 0.5 * (pk + pk.T)
    n_want = min(mesh.n - 1, n_modes + 1)
    try:
        vals, vecs = scipy.linalg.eigh(h, gram, subset_by_index=[0, n_want])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"generalized eigensolver failed: {exc}") from exc
    lam = vals / (2 * math.pi)
    if drop_monopole:
        # fraction of the mode that is a uniform net charge
        net = np.abs(mesh.areas @ vecs) / np.sqrt(mesh.total_area * (mesh.areas @ vecs**2))
        charged = int(np.argmax(net))
        keep = np.ones(len(lam), bool)
        if net[charged] > 0.5:
            keep[charged] = False
        lam, vecs = lam[keep], vecs[:, keep]
    lam, vecs = lam[:n_modes], vecs[:, :n_modes]
    resid = np.linalg.norm(kmat @ vecs - 2 * math.pi * vecs * lam, axis=0) / (
        2 * math.pi * np.linalg.norm(vecs, axis=0)
    )
    if np.any(np.abs(lam) >= 1):
        raise NumericError(f"eigenvalues outside (-1, 1): {lam[np.abs(lam) >= 1]}")
    vecs = _align_degenerate(mesh, gram, lam, vecs)
    log.info("BEM eigensolve: %d elements, asymmetry %.2e, max residual %.2e", mesh.n, asym, resid.max())
    return PlasmonModeSet(mesh=mesh, lam=lam, sigma=vecs, residual=float(resid.max()), asymmetry=asym)


def drude_dress(modes: PlasmonModeSet, drude: Drude | None = None) -> PlasmonModeSet:
    """Attach a Drude metal; modes with lambda outside (-1, 1) are discarded with a warning."""
    drude = drude or Drude()
    ok = (modes.lam > -1) & (modes.lam < 1)
    if not np.all(ok):
        warnings.warn(f"discarding {np.count_nonzero(~ok)} modes with lambda outside (-1, 1)")
    return replace(modes, lam=modes.lam[ok], sigma=modes.sigma[:, ok], drude=drude)


def g_plasmon(modes: PlasmonModeSet, omega) -> np.ndarray:
    """Spectral functions Im{-2 / (eps (1 + lambda) + 1 - lambda)}, shape (..., n_modes)."""
    eps = modes._need_drude().eps(omega)[..., None]
    lam = modes.lam
    return np.imag(-2.0 / (eps * (1 + lam) + (1 - lam)))


def g_lorentzian(omega_n, gamma_n, weight_n, omega) -> np.ndarray:
    """Lorentzian approximation Im{(G/pi) / (w_n - w - i gamma/2)}, shape (..., n_modes)."""
    omega = np.asarray(omega, dtype=float)[..., None]
    return np.imag((np.asarray(weight_n) / math.pi) / (np.asarray(omega_n) - omega - 0.5j * np.asarray(gamma_n)))
