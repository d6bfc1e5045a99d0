"""Power Young functions, Luxemburg norms on tents and the constant ``c_Phi``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class YoungFunction:
    """``Phi(t) = t**r`` with its complementary function ``Psi(t) = kappa_r t**r'``."""

    r: float = 2.0
    family: str = "power"

    def __post_init__(self):
        if self.family != "power":
            raise ValueError(f"unsupported Young family {self.family!r}")
        if self.r <= 1:
            raise ValueError("power Young function needs r > 1")

    @property
    def conjugate(self) -> float:
        return self.r / (self.r - 1.0)

    @property
    def kappa(self) -> float:
        r = self.r
        return (1.0 - 1.0 / r) * r ** (-1.0 / (r - 1.0))

    def phi(self, t):
        return np.asarray(t, dtype=float) ** self.r

    def psi(self, t):
        return self.kappa * np.asarray(t, dtype=float) ** self.conjugate

    def psi_inv(self, y):
        return (np.asarray(y, dtype=float) / self.kappa) ** (1.0 / self.conjugate)

    def complement(self) -> "YoungFunction":
        """``Psi`` rescaled to the power family (drops the factor ``kappa``)."""
        return YoungFunction(self.conjugate)


def orlicz_norm(values, weights, young: YoungFunction, rtol: float = 1e-10) -> float:
    """Luxemburg norm ``inf{lam : <Phi(|f|/lam)> <= 1}`` for the discrete measure ``weights``.

    ``weights`` are the quadrature weights of the nodes of a tent; the average is
    normalized by their sum.
    """
    f = np.abs(np.asarray(values))
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("empty tent")
    top = f.max(initial=0.0)
    if top == 0:
        return 0.0
    # the norm is homogeneous; solving for f/top keeps the bracket away from under/overflow
    g = f / top

    def excess(lam):
        return float(np.sum(young.phi(g / lam) * w) / total) - 1.0

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0
    while excess(lo) <= 0:
        lo /= 2.0
    return top * float(brentq(excess, lo, hi, xtol=rtol * lo, rtol=rtol))


def power_luxemburg(values, weights, r: float) -> float:
    """Closed form ``<|f|**r>**(1/r)`` of the Luxemburg norm for ``Phi = t**r``."""
    f = np.abs(np.asarray(values))
    w = np.asarray(weights, dtype=float)
    return float((np.sum(f**r * w) / w.sum()) ** (1.0 / r))


@dataclass(frozen=True)
class CPhi:
    r: float
    rho: float
    C: float
    c_phi: float
    c_phi_exact: float
    terms: int

    @property
    def ratio_to_log(self) -> float:
        return self.c_phi / (1.0 + math.log(self.r / (self.r - 1.0)))


def cphi(r: float, rho: float, C: float, tail: float = 1e-12) -> CPhi:
    """``c_Phi`` for ``Phi = t**r``.

    ``c_phi`` is the power proxy ``1 + sum rho**(C**k / r')``; ``c_phi_exact`` uses
    ``1/Psi^{-1}(rho**(-C**k)) = kappa**(1/r') rho**(C**k/r')``.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if C <= 1 or C * rho >= 1:
        raise ValueError("C must lie in (1, 1/rho)")
    if r <= 1:
        raise ValueError("r must exceed 1")
    rp = r / (r - 1.0)
    log_rho = math.log(rho)
    total, k = 0.0, 1
    while True:
        term = math.exp(log_rho * C**k / rp)
        total += term
        # terms decay super-geometrically once the ratio drops below 1/2
        ratio = math.exp(log_rho * C**k * (C - 1.0) / rp)
        if ratio < 0.5 and term * ratio / (1.0 - ratio) < tail:
            break
        k += 1
    kappa = YoungFunction(r).kappa
    return CPhi(r, rho, C, 1.0 + total, 1.0 + kappa ** (1.0 / rp) * total, k)
