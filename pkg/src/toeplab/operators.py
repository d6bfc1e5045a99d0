"""Bergman projection, Toeplitz and Berezin transforms, sparse and maximal operators, norms.

Two evaluation paths for the projection share one quadrature:

* ``project`` sums the kernel against the grid at arbitrary points (the
  defining integral, fine inside the safety radius);
* ``SpectralProjector`` expands ``P g(z) = sum (j+1) <g, w^j> z^j`` with the
  moments computed ring by ring through the FFT, which keeps grid-node
  evaluation stable up to the boundary layer.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .dyadic import KubeId, point_generation
from .geometry import kernel, mobius, norm_kernel
from .orlicz import YoungFunction, orlicz_norm
from .quadrature import GridFunction, QuadratureGrid, TentIndex

DEFAULT_SAFETY = 0.9


class AccuracyWarning(UserWarning):
    pass


def _values(f):
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=complex)


def _weight_values(sigma, grid):
    if sigma is None:
        return np.ones(len(grid))
    if callable(sigma):
        return np.asarray(sigma(grid.z), dtype=float)
    return np.asarray(sigma, dtype=float)


def _warn_radius(z, safety):
    if np.any(np.abs(z) > safety):
        warnings.warn(f"evaluation beyond the safety radius {safety}", AccuracyWarning, stacklevel=3)


# projection ----------------------------------------------------------------

def project(f, grid: QuadratureGrid, z, safety: float | None = None, chunk: int = 64):
    """``P f(z) = sum_nodes K(z, w) f(w) dV(w)`` by direct kernel quadrature."""
    safety = grid.spec.safety_radius if safety is None else safety
    z = np.asarray(z, dtype=complex)
    _warn_radius(z, safety)
    fw = _values(f) * grid.weights
    flat = z.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        out[start:start + chunk] = kernel(block[:, None], grid.z[None, :]) @ fw
    return out.reshape(z.shape) if z.ndim else complex(out[0])


class SpectralProjector:
    """Bergman projection on the grid nodes through the monomial moments.

    Ring ``q`` with ``N_q`` nodes contributes to the moments ``j < N_q/2`` only
    (higher modes would alias); ``modes`` caps the expansion length.
    """

    def __init__(self, grid: QuadratureGrid, modes: int | None = None):
        self.grid = grid
        self.modes = int(grid.ring_count.max() // 2) if modes is None else int(modes)
        self.j = np.arange(self.modes)
        self.band = np.minimum(grid.ring_count // 2, self.modes)

    def moments(self, values):
        """``g_j = int g(w) conj(w)**j dV(w)`` for ``j < modes``."""
        values = _values(values)
        grid = self.grid
        g = np.zeros(self.modes, dtype=complex)
        for q, sl in grid.rings:
            n, band = grid.ring_count[q], self.band[q]
            jj = self.j[:band]
            spectrum = np.fft.fft(values[sl])[:band] / n
            g[:band] += grid.ring_weight[q] * grid.ring_radius[q] ** jj * spectrum * np.exp(-1j * math.pi * jj / n)
        return g

    def evaluate_grid(self, moments):
        grid = self.grid
        c = (self.j + 1) * moments
        out = np.empty(len(grid), dtype=complex)
        for q, sl in grid.rings:
            n = grid.ring_count[q]
            a = c * grid.ring_radius[q] ** self.j * np.exp(1j * math.pi * self.j / n)
            folded = (np.bincount(self.j % n, a.real, n) + 1j * np.bincount(self.j % n, a.imag, n))
            out[sl] = n * np.fft.ifft(folded)
        return out

    def evaluate(self, moments, z):
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, (self.j + 1) * moments)

    def apply(self, f) -> np.ndarray:
        return self.evaluate_grid(self.moments(f))


def project_grid(f, projector: SpectralProjector) -> GridFunction:
    name = f.provenance if isinstance(f, GridFunction) else "custom"
    return GridFunction(projector.apply(f), f"P[{name}]")


def toeplitz(u, f, grid: QuadratureGrid, z, adjoint: bool = False, safety=None):
    """``T_u f(z) = P(u f)(z)``; the adjoint route returns ``conj(u(z)) P f(z)``."""
    if adjoint:
        return np.conj(u(z)) * project(f, grid, z, safety)
    return project(u(grid.z) * _values(f), grid, z, safety)


def toeplitz_grid(u, f, projector: SpectralProjector, adjoint: bool = False) -> np.ndarray:
    z = projector.grid.z
    if adjoint:
        return np.conj(u(z)) * projector.apply(f)
    return projector.apply(u(z) * _values(f))


# Berezin transform -----------------------------------------------------------

def berezin(u, z, grid: QuadratureGrid, route: str = "invariance", safety=None):
    """``<T_u k_z, k_z>`` by the kernel route or the Mobius-invariance route."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    if route == "kernel":
        _warn_radius(flat, grid.spec.safety_radius if safety is None else safety)
        uw = u(grid.z) * grid.weights
        for i, zi in enumerate(flat):
            out[i] = np.sum(uw * np.abs(norm_kernel(zi, grid.z)) ** 2)
    elif route == "invariance":
        if np.any(np.abs(flat) > 0.999):
            raise ValueError("invariance route is limited to |z| <= 0.999")
        for i, zi in enumerate(flat):
            out[i] = np.sum(u(mobius(zi, grid.z)) * grid.weights)
    else:
        raise ValueError(f"unknown Berezin route {route!r}")
    return out.reshape(z.shape) if z.ndim else complex(out[0])


# chains of tents -------------------------------------------------------------

def chain_indices(index: TentIndex, z=None):
    """Per system an integer array ``(npts, G+1)`` of arc indices along each point's chain.

    Entries are ``-1`` for generations beyond the point's own kube.  ``z=None``
    means the grid nodes.
    """
    if z is None:
        return [np.stack(per_gen, axis=1) for per_gen in index.idx]
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    gen = point_generation(np.abs(z), index.forest.m, index.forest.params.theta0)
    theta = np.angle(z)
    out = []
    for system in index.forest.systems:
        cols = []
        for k in range(index.G + 1):
            j = system.angular_index(theta, k).astype(np.int64)
            j[gen < k] = -1
            cols.append(j)
        out.append(np.stack(cols, axis=1))
    return out


def gather(table, chains, ell):
    """``table[ell][k][j]`` along chains; NaN outside."""
    idx = chains[ell]
    out = np.full(idx.shape, np.nan)
    for k in range(idx.shape[1]):
        ok = idx[:, k] >= 0
        out[ok, k] = table[ell][k][idx[ok, k]]
    return out


def _squeeze(values, z):
    return float(values[0]) if z is not None and np.ndim(z) == 0 else values


def sparse_apply(u, f, index: TentIndex, z=None, usup=None, strategy=None):
    """``S_u f(z) = sum_ell sum_{K^ containing z} ||u||_{L^inf(K^)} <|f|>_{K^}``."""
    if usup is None:
        usup = u.tent_sups(index.forest, index.G, index, strategy)
    avg = index.tent_averages(np.abs(_values(f)))
    table = [[s * a for s, a in zip(srow, arow)] for srow, arow in zip(usup, avg)]
    return _squeeze(_chain_reduce(table, index, z, np.add), z)


def _chain_reduce(table, index, z, op):
    """Fold ``table[ell][k][j]`` along every chain with ``op`` (missing tents count as 0)."""
    chains = index.idx if z is None else [list(c.T) for c in chain_indices(index, z)]
    out = None
    for ell, per_gen in enumerate(chains):
        for k, j in enumerate(per_gen):
            values = np.nan_to_num(np.asarray(table[ell][k], dtype=float), nan=0.0)
            term = np.where(j >= 0, values[np.maximum(j, 0)], 0.0)
            out = term if out is None else op(out, term)
    return out


def _chain_max(table, index, z):
    return _squeeze(_chain_reduce(table, index, z, np.maximum), z)


def tent_luxemburg(values, index: TentIndex, young: YoungFunction, exact: bool = False):
    """Luxemburg norms over every tent; ``exact`` runs the bisection per tent."""
    f = np.abs(_values(values))
    w = index.grid.weights
    if not exact:
        avg = index.tent_averages(f**young.r)
        return [[a ** (1.0 / young.r) for a in rows] for rows in avg]
    out = []
    for ell, per_gen in enumerate(index.idx):
        rows = []
        for k in range(len(per_gen)):
            norms = np.full(index.forest.m**k, np.nan)
            for t, members in enumerate(index.tent_members(ell, k)):
                if members.size:
                    norms[t] = orlicz_norm(f[members], w[members], young)
            rows.append(norms)
        out.append(rows)
    return out


def maximal(kind: str, f, index: TentIndex, z=None, u=None, sigma=None, kube: KubeId | None = None,
            young: YoungFunction | None = None, r: float | None = None, usup=None, exact_luxemburg=False):
    """Dyadic maximal operators over the chains of tents containing ``z``.

    ``kind`` is one of ``global``, ``K`` (localized to ``D(kube)``), ``u``,
    ``sigma``, ``u_phi`` and ``u_r``.
    """
    f = np.abs(_values(f))
    if kind in ("u", "u_phi", "u_r") and usup is None:
        if u is None:
            raise ValueError(f"maximal kind {kind!r} needs a symbol")
        usup = u.tent_sups(index.forest, index.G, index)
    if kind == "global":
        table = index.tent_averages(f)
    elif kind == "K":
        if kube is None:
            raise ValueError("localized maximal operator needs a kube")
        avg = index.tent_averages(f)
        m = index.forest.m
        table = [[np.zeros_like(a) for a in rows] for rows in avg]
        for k in range(kube.generation, index.G + 1):
            j = np.arange(m**k)
            inside = j // m ** (k - kube.generation) == kube.index
            table[kube.system][k] = np.where(inside, avg[kube.system][k], 0.0)
    elif kind == "u":
        avg = index.tent_averages(f)
        table = [[s * a for s, a in zip(sr, ar)] for sr, ar in zip(usup, avg)]
    elif kind == "sigma":
        sw = _weight_values(sigma, index.grid)
        num = index.tent_sums(f * sw * index.grid.weights)
        den = index.tent_sums(sw * index.grid.weights)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = [[n / d for n, d in zip(nr, dr)] for nr, dr in zip(num, den)]
    elif kind in ("u_phi", "u_r"):
        if kind == "u_r":
            if r is None:
                raise ValueError("M_{u,r} needs r")
            lux = tent_luxemburg(f, index, YoungFunction(r))
        else:
            lux = tent_luxemburg(f, index, young or YoungFunction(2.0), exact=exact_luxemburg)
        table = [[s * a for s, a in zip(sr, ar)] for sr, ar in zip(usup, lux)]
    else:
        raise ValueError(f"unknown maximal kind {kind!r}")
    return _chain_max(table, index, z)


# norms ---------------------------------------------------------------------

def _tail_mask(grid, R):
    return np.ones(len(grid), dtype=bool) if R is None else np.abs(grid.z) > R


def strong_norm(f, grid: QuadratureGrid, p: float = 2.0, sigma=None, R=None) -> float:
    """``(sum |f|^p sigma dV)^(1/p)``, restricted to ``|z| > R`` for tails."""
    keep = _tail_mask(grid, R)
    f = np.abs(_values(f))[keep]
    s = _weight_values(sigma, grid)[keep]
    return float(np.sum(f**p * s * grid.weights[keep]) ** (1.0 / p))


def weak_norm(f, grid: QuadratureGrid, sigma=None, R=None) -> float:
    """``sup_v v * sigma({|f| >= v})`` over the sampled values ``v`` of ``|f|``.

    For a discrete measure this equals ``sup_lam lam * sigma({|f| > lam})``: the
    supremum is approached as ``lam`` increases to a sampled value.
    """
    keep = _tail_mask(grid, R)
    f = np.abs(_values(f))[keep]
    mass = (_weight_values(sigma, grid) * grid.weights)[keep]
    if f.size == 0:
        return 0.0
    order = np.argsort(-f, kind="stable")
    fs, cum = f[order], np.cumsum(mass[order])
    # last position of each run of equal values
    last = np.flatnonzero(np.append(fs[1:] != fs[:-1], True))
    return float(np.max(fs[last] * cum[last]))


def norms(f, grid: QuadratureGrid, mode: str = "strong", sigma=None, p: float = 2.0, R=None) -> float:
    """Dispatch ``strong``, ``weak``, ``strong_tail`` and ``weak_tail``."""
    if mode == "strong":
        return strong_norm(f, grid, p, sigma)
    if mode == "weak":
        return weak_norm(f, grid, sigma)
    if mode == "strong_tail":
        return strong_norm(f, grid, p, sigma, R)
    if mode == "weak_tail":
        return weak_norm(f, grid, sigma, R)
    raise ValueError(f"unknown norm mode {mode!r}")


def truncation_error_bar(grid: QuadratureGrid, f_sup: float, sigma_sup: float, p: float = 2.0) -> float:
    """``L^p`` mass missed beyond the grid for bounded ``f`` and ``sigma``."""
    deficit = max(0.0, 1.0 - grid.covered_mass)
    return float((f_sup**p * sigma_sup * deficit) ** (1.0 / p))
