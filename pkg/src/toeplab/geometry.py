"""Kernel and hyperbolic geometry of the unit ball.

All functions accept numpy arrays and broadcast.  For ``n == 1`` points are
complex scalars/arrays; for ``n >= 2`` points carry their coordinates on the
last axis.
"""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    """A point lies outside the open ball or hits the kernel pole."""


def _pairing(z, w, n):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if n == 1:
        return z * np.conj(w)
    return np.sum(z * np.conj(w), axis=-1)


def _modulus(z, n):
    z = np.asarray(z, dtype=complex)
    if n == 1:
        return np.abs(z)
    return np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))


def _check_interior(*points, n=1):
    for pt in points:
        if np.any(_modulus(pt, n) >= 1.0):
            raise DomainError("point outside the open unit ball")


def kernel(z, w, n=1):
    """Bergman kernel ``1/(1 - z.conj(w))**(n+1)`` for the normalized volume."""
    _check_interior(z, w, n=n)
    denom = 1.0 - _pairing(z, w, n)
    if np.any(denom == 0):
        raise DomainError("kernel pole")
    return 1.0 / denom ** (n + 1)


def norm_kernel(z, w, p=2.0, n=1):
    """Normalized kernel ``k_z^{(p)}(w) = (1-|z|^2)^{(n+1)/p'} / (1 - conj(z) w)^{n+1}``.

    Holomorphic in ``w``; ``p = 2`` gives the usual unit vector ``k_z`` of A^2.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    _check_interior(z, w, n=n)
    pp = p / (p - 1.0)
    mod2 = _modulus(z, n) ** 2
    denom = 1.0 - _pairing(w, z, n)
    return (1.0 - mod2) ** ((n + 1) / pp) / denom ** (n + 1)


def mobius(z, w):
    """Involutive disk automorphism ``(z - w)/(1 - conj(z) w)`` swapping ``z`` and 0."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return (z - w) / (1.0 - np.conj(z) * w)


def beta(z, w):
    """Bergman (hyperbolic) distance on the disk."""
    t = np.abs(mobius(z, w))
    return np.arctanh(np.minimum(t, 1.0))


def in_carleson_tent(apex, w):
    """Membership of ``w`` in the Carleson tent over ``apex``.

    The tent over 0 is the whole disk.
    """
    apex = np.asarray(apex, dtype=complex)
    w = np.asarray(w, dtype=complex)
    r = np.abs(apex)
    safe = np.where(r > 0, r, 1.0)
    inside = np.abs(1.0 - np.conj(w) * apex / safe) < 1.0 - r
    return np.where(r > 0, inside, np.abs(w) < 1.0)


def carleson_tent_measure(apex):
    """Normalized area of the Carleson tent: lens of the disk and D(apex/|apex|, 1-|apex|)."""
    r = np.abs(np.asarray(apex, dtype=complex))
    h = 1.0 - r
    lens = (h**2 * np.arccos(h / 2.0) + np.arccos(1.0 - h**2 / 2.0)
            - 0.5 * h * np.sqrt(4.0 - h**2)) / np.pi
    return np.where(r > 0, lens, 1.0)


def carleson_tent_halfwidth(apex):
    """Angular half-width of the tent seen from the origin (``arcsin(1-|apex|)``)."""
    r = np.abs(np.asarray(apex, dtype=complex))
    return np.where(r > 0, np.arcsin(np.clip(1.0 - r, 0.0, 1.0)), np.pi)


def boundary_rho(zeta, eta):
    """Boundary pseudo-metric ``|1 - zeta conj(eta)|``."""
    zeta = np.asarray(zeta, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    return np.abs(1.0 - zeta * np.conj(eta))
