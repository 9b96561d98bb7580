"""Modified Bessel functions of the second kind used by the mode profiles."""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

__all__ = ["bessel_k0", "bessel_k1", "bessel_kn_upward", "DomainError"]


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _check(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("K0/K1 are only defined here for x > 0")
    return x


def bessel_k0(x):
    """K0(x) for x > 0 (Cephes Chebyshev expansions via scipy)."""
    x = _check(x)
    out = _sp.k0(x)
    return out if out.ndim else float(out)


def bessel_k1(x):
    """K1(x) for x > 0."""
    x = _check(x)
    out = _sp.k1(x)
    return out if out.ndim else float(out)


def bessel_kn_upward(m_max: int, x) -> np.ndarray:
    """K_0 ... K_{m_max} at ``x`` by upward recurrence (stable for K), shape (m_max + 1, ...).

    Uses unchecked K0/K1 evaluations; callers guarantee x > 0.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((m_max + 1,) + x.shape)
    out[0] = _sp.k0(x)
    if m_max >= 1:
        out[1] = _sp.k1(x)
    for m in range(1, m_max):
        out[m + 1] = out[m - 1] + (2.0 * m / x) * out[m]
    return out
