"""Weights, tent averages and dyadic weight characteristics.

Radial power weights ``sigma_b = c (1 - |z|**2)**(-b)`` have closed-form tent
averages ``<sigma_b**e>_{K^} = c**e x_k**(-e b)/(1 - e b)`` with ``x_k = 1 - r_k**2``,
independent of the arc.  Every characteristic has a closed-form fast path for
them and a quadrature path (``TentIndex``) for everything else.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .dyadic import DyadicForest, KubeId, defect, structure_constants
from .geometry import carleson_tent_measure, in_carleson_tent
from .quadrature import QuadratureGrid, TentIndex


class DivergenceError(ValueError):
    """A power of the weight is not integrable over a tent."""


class CoverageError(ValueError):
    """Too few quadrature nodes in a tent."""


class InfeasibleError(ValueError):
    pass


MIN_TENT_NODES = 16


class Weight:
    """Positive weight; ``power`` holds ``b`` for the radial family ``scale*(1-|z|^2)^(-b)``."""

    def __init__(self, evaluator, name="custom", power=None, scale=1.0):
        self.evaluator = evaluator
        self.name = name
        self.power = power
        self.scale = float(scale)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.evaluator(z), dtype=float) * np.ones(z.shape)

    def __repr__(self):
        return f"Weight({self.name})"

    @property
    def is_power(self) -> bool:
        return self.power is not None

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            if other <= 0:
                raise ValueError("weights scale by positive numbers only")
            return Weight(lambda z: other * self.evaluator(z), f"{other:g}*{self.name}",
                          self.power, self.scale * other)
        if self.is_power and other.is_power:
            return power(self.power + other.power, self.scale * other.scale)
        return Weight(lambda z: self(z) * other(z), f"{self.name}*{other.name}")

    __rmul__ = __mul__

    def pow(self, e: float) -> "Weight":
        if self.is_power:
            return power(self.power * e, self.scale**e)
        return Weight(lambda z: self(z) ** e, f"({self.name})^{e:g}")


def power(b: float, scale: float = 1.0) -> Weight:
    b = float(b)
    return Weight(lambda z: scale * (1.0 - np.abs(z) ** 2) ** (-b), f"power:b={b:g}", b, scale)


def unit() -> Weight:
    return power(0.0)


def table(r, theta, values, name="table") -> Weight:
    """Nearest-sample lookup in a polar table of positive values."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("tabulated weight must be positive")
    tree = cKDTree(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))

    def lookup(z):
        pts = np.column_stack([np.real(z).ravel(), np.imag(z).ravel()])
        _, i = tree.query(pts)
        return values[i].reshape(np.shape(z))

    return Weight(lookup, name)


def read_table(path) -> Weight:
    with open(path, newline="") as fh:
        rows = [(float(row["r"]), float(row["theta"]), float(row["value"])) for row in csv.DictReader(fh)]
    r, theta, values = map(np.array, zip(*rows))
    return table(r, theta, values, f"table:{path}")


def demo_table(n_r: int = 96, n_theta: int = 256) -> Weight:
    """Tabulated non-radial weight ``(1-|z|^2)^(-0.3) (1.5 + cos(arg z))`` on a polar mesh."""
    r = np.sqrt(np.linspace(0.0, 1.0, n_r, endpoint=False) + 0.5 / n_r)
    theta = (np.arange(n_theta) + 0.5) * 2.0 * math.pi / n_theta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    values = (1.0 - rr**2) ** -0.3 * (1.5 + np.cos(tt))
    return table(rr.ravel(), tt.ravel(), values.ravel(), "table:demo")


def parse_weight(text: str) -> Weight:
    """``one``, ``power:b=<b>``, ``table:<csv path>``, ``table:demo`` or ``product:[w1, w2, ...]``."""
    text = text.strip()
    if text == "one":
        return unit()
    match = re.fullmatch(r"power:(?:b=)?([-+0-9.eE]+)", text)
    if match:
        return power(float(match.group(1)))
    if text == "table:demo":
        return demo_table()
    if text.startswith("table:"):
        return read_table(text[len("table:"):])
    match = re.fullmatch(r"product:\[(.*)\]", text)
    if match:
        parts = _split_top(match.group(1))
        if not parts:
            raise ValueError("empty product")
        out = parse_weight(parts[0])
        for part in parts[1:]:
            out = out * parse_weight(part)
        return out
    raise ValueError(f"unrecognized weight spec {text!r}")


def _split_top(text):
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i].strip())
            start = i + 1
    if text[start:].strip():
        parts.append(text[start:].strip())
    return parts


def dual_weight(sigma: Weight, p: float) -> Weight:
    """``sigma**(1 - p')``."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    return sigma.pow(1.0 - p / (p - 1.0))


# averages -------------------------------------------------------------------

def power_average(b: float, e: float, k, m: int = 2, scale: float = 1.0):
    """``<sigma_b**e>`` over generation-``k`` tents."""
    if e * b >= 1:
        raise DivergenceError(f"(1-|z|^2)^(-{e * b:g}) is not integrable")
    return scale**e * defect(k, m) ** (-e * b) / (1.0 - e * b)


def tent_average(sigma: Weight, kube, exponent: float = 1.0, forest: DyadicForest | None = None,
                 index: TentIndex | None = None) -> float:
    """``<sigma**e>_{K^}``, closed form for power weights, quadrature otherwise."""
    m = forest.m if forest is not None else (index.forest.m if index is not None else 2)
    if sigma.is_power:
        return float(power_average(sigma.power, exponent, kube.generation, m, sigma.scale))
    if index is None:
        raise ValueError("non-radial weights need a TentIndex")
    mask = index.tent_mask(kube.system, kube.generation, kube.index)
    if np.count_nonzero(mask) < MIN_TENT_NODES:
        raise CoverageError(f"tent {kube} holds fewer than {MIN_TENT_NODES} nodes")
    w = index.grid.weights[mask]
    return float(np.sum(sigma(index.grid.z[mask]) ** exponent * w) / w.sum())


# characteristic kinds ----------------------------------------------------------

@dataclass(frozen=True)
class BpDyadic:
    p: float


@dataclass(frozen=True)
class B1Dyadic:
    pass


@dataclass(frozen=True)
class UBp:
    u: object
    p: float


@dataclass(frozen=True)
class UB1:
    u: object


@dataclass(frozen=True)
class RH:
    r: float


@dataclass(frozen=True)
class BInfinity:
    cross_system: bool = True


@dataclass(frozen=True)
class Regularity:
    pass


@dataclass
class CharacteristicResult:
    kind: object
    value: float
    witness: KubeId
    per_generation: np.ndarray
    per_system: list = field(default_factory=list)
    exact: bool = False

    def as_row(self) -> dict:
        return {"kind": type(self.kind).__name__, "value": self.value, "exact": self.exact,
                "witness_system": self.witness.system, "witness_generation": self.witness.generation,
                "witness_index": self.witness.index}


def _conj(p):
    return p / (p - 1.0)


def _bp_constant(b, p):
    pp = _conj(p)
    if b >= 1 or -b * (pp - 1.0) >= 1:
        raise DivergenceError(f"sigma_{b:g} or its dual is not integrable for p = {p:g}")
    return 1.0 / ((1.0 - b) * (1.0 + b * (pp - 1.0)) ** (p - 1.0))


def power_binfinity(b: float, m: int = 2, G: int = 12, tol: float = 1e-15):
    """Closed-form ``[sigma_b]_{B_inf}`` per generation (untruncated inner maximal function).

    For ``b > 0`` the maximal function on layer ``j`` of a generation-``k`` tent is
    ``<sigma_b>`` of the generation-``j`` tent, so the tent ratio is
    ``sum_{j>=k} (x_j - x_{j+1})/x_k * (x_j/x_k)**(-b)``; for ``b <= 0`` it is 1.
    """
    if b >= 1:
        raise DivergenceError("sigma_b is not integrable for b >= 1")
    ks = np.arange(G + 1)
    if b <= 0:
        return np.ones(G + 1)
    out = np.empty(G + 1)
    for k in ks:
        xk = defect(k, m)
        total, j = 0.0, k
        while True:
            xj, xj1 = defect(j, m), defect(j + 1, m)
            term = (xj - xj1) / xk * (xj / xk) ** (-b)
            total += term
            # deep layers: x_j ~ 4 m^-j, the terms become geometric with ratio m^(b-1)
            q = float(m) ** (b - 1.0)
            if j - k > 60 and term * q / (1.0 - q) < tol * total:
                total += term * q / (1.0 - q)
                break
            j += 1
        out[k] = total
    return out


def _all_tents(forest, G):
    return [[np.arange(forest.m**k) for k in range(G + 1)] for _ in forest.systems]


def _argmax_tables(tables):
    best, witness = -np.inf, None
    per_gen = np.full(len(tables[0]), -np.inf)
    per_system = []
    for ell, rows in enumerate(tables):
        sys_best = -np.inf
        for k, vals in enumerate(rows):
            vals = np.asarray(vals, dtype=float)
            if vals.size == 0 or np.all(np.isnan(vals)):
                continue
            j = int(np.nanargmax(vals))
            v = float(vals[j])
            per_gen[k] = max(per_gen[k], v)
            sys_best = max(sys_best, v)
            if v > best:
                best, witness = v, KubeId(ell, k, j)
        per_system.append(sys_best)
    return best, witness, per_gen, per_system


def _broadcast(values, forest, G):
    return [[np.full(forest.m**k, float(values[k])) for k in range(G + 1)] for _ in forest.systems]


def characteristic(kind, sigma: Weight, forest: DyadicForest, G: int | None = None,
                   index: TentIndex | None = None, strategy: str | None = None) -> CharacteristicResult:
    """Supremum of the kind's defining expression over tents of generation ``<= G``."""
    G = forest.G if G is None else G
    if index is not None:
        G = min(G, index.G)
    m = forest.m
    k = np.arange(G + 1)
    exact = sigma.is_power
    if exact:
        b = sigma.power
        if b >= 1:
            raise DivergenceError("sigma_b is not integrable for b >= 1")
        if isinstance(kind, BpDyadic):
            tables = _broadcast(np.full(G + 1, _bp_constant(b, kind.p)), forest, G)
        elif isinstance(kind, B1Dyadic):
            tables = _broadcast(np.full(G + 1, 1.0 / (1.0 - b) if b >= 0 else np.inf), forest, G)
        elif isinstance(kind, (UBp, UB1)):
            base = _bp_constant(b, kind.p) if isinstance(kind, UBp) else (
                1.0 / (1.0 - b) if b >= 0 else np.inf)
            usup = kind.u.tent_sups(forest, G, index, strategy)
            tables = [[s * base for s in rows] for rows in usup]
            exact = kind.u.exact_sup is not None and strategy in (None, "exact")
        elif isinstance(kind, RH):
            r = kind.r
            if r * b >= 1:
                raise DivergenceError(f"sigma_{b:g}^{r:g} is not integrable")
            value = (1.0 - b) / (1.0 - r * b) ** (1.0 / r)
            tables = _broadcast(np.full(G + 1, value), forest, G)
        elif isinstance(kind, BInfinity):
            tables = _broadcast(power_binfinity(b, m, G), forest, G)
        elif isinstance(kind, Regularity):
            tables = _broadcast((defect(k, m) / defect(k + 1, m)) ** abs(b), forest, G)
        else:
            raise TypeError(f"unknown characteristic kind {kind!r}")
    else:
        if index is None:
            raise ValueError("non-radial weights need a TentIndex")
        tables = _grid_tables(kind, sigma, index, G, strategy)
    value, witness, per_gen, per_system = _argmax_tables(tables)
    return CharacteristicResult(kind, value, witness, per_gen, per_system, exact)


def _grid_tables(kind, sigma, index: TentIndex, G, strategy):
    grid = index.grid
    s = sigma(grid.z)
    count = index.count

    def avg(values):
        tab = index.tent_averages(values)
        return [[np.where(c >= MIN_TENT_NODES, a, np.nan) for a, c in zip(rows[: G + 1], crow)]
                for rows, crow in zip(tab, count)]

    if isinstance(kind, (BpDyadic, UBp)):
        p = kind.p
        a1, a2 = avg(s), avg(s ** (1.0 - _conj(p)))
        tables = [[x * y ** (p - 1.0) for x, y in zip(r1, r2)] for r1, r2 in zip(a1, a2)]
    elif isinstance(kind, (B1Dyadic, UB1)):
        inv = index.tent_max(1.0 / s)
        tables = [[x * y for x, y in zip(r1, r2[: G + 1])] for r1, r2 in zip(avg(s), inv)]
    elif isinstance(kind, RH):
        tables = [[x ** (1.0 / kind.r) / y for x, y in zip(r1, r2)]
                  for r1, r2 in zip(avg(s**kind.r), avg(s))]
    elif isinstance(kind, BInfinity):
        tables = grid_binfinity(sigma, index, G, kind.cross_system)
    elif isinstance(kind, Regularity):
        hi = index.kube_stats(s, np.maximum)
        lo = index.kube_stats(s, np.minimum)
        tables = [[np.where(np.isfinite(h), h / l, np.nan) for h, l in zip(hr[: G + 1], lr[: G + 1])]
                  for hr, lr in zip(hi, lo)]
    else:
        raise TypeError(f"unknown characteristic kind {kind!r}")
    if isinstance(kind, (UBp, UB1)):
        usup = kind.u.tent_sups(index.forest, G, index, strategy)
        tables = [[u * t for u, t in zip(ur, tr)] for ur, tr in zip(usup, tables)]
    return tables


def grid_binfinity(sigma: Weight, index: TentIndex, G: int | None = None, cross_system: bool = True):
    """``(1/sigma(K^)) int_{K^} M(sigma chi_{K^})`` per tent on the grid.

    The inner maximal function walks every node's chain of tents (generation
    ``<= G``) in each system, or only in the tent's own system when
    ``cross_system`` is false.
    """
    G = index.G if G is None else min(G, index.G)
    grid = index.grid
    sw = sigma(grid.z) * grid.weights
    forest = index.forest
    out = []
    for ell in range(index.M):
        rows = []
        for k in range(G + 1):
            vals = np.full(forest.m**k, np.nan)
            for j, members in enumerate(index.tent_members(ell, k)):
                if members.size < MIN_TENT_NODES:
                    continue
                local = sw[members]
                best = np.zeros(members.size)
                for other in (range(index.M) if cross_system else [ell]):
                    for i in range(G + 1):
                        ji = index.idx[other][i][members]
                        ok = ji >= 0
                        labels, inverse = np.unique(ji[ok], return_inverse=True)
                        sums = np.bincount(inverse, local[ok], labels.size)
                        best[ok] = np.maximum(best[ok], (sums / index.mass[other][i][labels])[inverse])
                vals[j] = np.sum(best * grid.weights[members]) / local.sum()
            rows.append(vals)
        out.append(rows)
    return out


# continuous characteristic ------------------------------------------------------

def continuous_bp(sigma: Weight, p: float, apexes, grid: QuadratureGrid):
    """Sampled lower bound for ``sup_z <sigma>_{T_z} <sigma^(1-p')>_{T_z}^(p-1)``.

    Returns ``(value, apex)``.
    """
    s = sigma(grid.z)
    sd = s ** (1.0 - _conj(p))
    best, arg = -np.inf, None
    for z in np.atleast_1d(np.asarray(apexes, dtype=complex)):
        mask = in_carleson_tent(z, grid.z)
        if np.count_nonzero(mask) < MIN_TENT_NODES:
            raise CoverageError(f"Carleson tent over {z} holds fewer than {MIN_TENT_NODES} nodes")
        w = grid.weights[mask]
        value = (np.sum(s[mask] * w) / w.sum()) * (np.sum(sd[mask] * w) / w.sum()) ** (p - 1.0)
        if value > best:
            best, arg = float(value), complex(z)
    return best, arg


def carleson_coverage(z, grid: QuadratureGrid) -> float:
    """Grid mass of the Carleson tent over the exact lens area."""
    return float(np.sum(grid.weights[in_carleson_tent(z, grid.z)]) / carleson_tent_measure(z))


# extrapolation -----------------------------------------------------------------

@dataclass(frozen=True)
class ExtrapolationParams:
    p: float
    p0: float
    r: float
    theta: float
    p1: float
    r_theta: float
    t_theta: float


def _extrapolation_terms(theta, p, p0):
    pp, p0p = _conj(p), _conj(p0)
    p1 = (1.0 - theta) / (1.0 / p - theta / p0)
    p1p = _conj(p1)
    r_t = p1 * (p0p + theta * p) / (p * p0p * (1.0 - theta))
    t_t = p1p * (p0 + theta * pp) / (pp * p0 * (1.0 - theta))
    return p1, r_t, t_t


def extrapolation_params(p: float, p0: float, r: float, tol: float = 1e-9, scan: int = 2000) -> ExtrapolationParams:
    """Largest ``theta`` with ``p1(theta)`` in ``(1, inf)`` and ``max(r(theta), t(theta)) <= r``."""
    if p <= 1 or p0 <= 1 or r <= 1:
        raise ValueError("need p, p0 > 1 and r > 1")
    pp, p0p = _conj(p), _conj(p0)
    if p == p0:
        theta = min(pp * (r - 1.0) / (p + r * pp), p * (r - 1.0) / (pp + r * p))
        p1, r_t, t_t = _extrapolation_terms(theta, p, p0)
        return ExtrapolationParams(p, p0, r, theta, p, r_t, t_t)
    theta_max = min(1.0, p0 / p, p0p / pp)

    def excess(theta):
        p1, r_t, t_t = _extrapolation_terms(theta, p, p0)
        if not 1.0 < p1 < np.inf:
            return np.inf
        return max(r_t, t_t) - r

    if excess(tol) > 0:
        _, r_t, t_t = _extrapolation_terms(tol, p, p0)
        raise InfeasibleError(f"no admissible theta: max(r, t) = {max(r_t, t_t):.12g} at theta = {tol:g}")
    grid = np.linspace(tol, theta_max, scan, endpoint=False)
    feasible = np.array([excess(t) <= 0 for t in grid])
    last = int(np.flatnonzero(feasible).max())
    lo = grid[last]
    hi = grid[last + 1] if last + 1 < scan else theta_max * (1.0 - 1e-12)
    if excess(hi) <= 0:
        theta = hi
    else:
        theta = brentq(excess, lo, hi, xtol=tol)
        while excess(theta) > 0:
            theta -= tol
    p1, r_t, t_t = _extrapolation_terms(theta, p, p0)
    return ExtrapolationParams(p, p0, r, float(theta), p1, r_t, t_t)


# predicted constants -------------------------------------------------------------

@dataclass(frozen=True)
class PredictedConstants:
    rh_bound: float
    weak_bound: float
    r: float
    rho: float
    alpha: float
    c_sigma: float
    b_infinity: float
    ub1: float


def predicted_constants(sigma: Weight, u, forest: DyadicForest, G: int | None = None,
                        index: TentIndex | None = None) -> PredictedConstants:
    """Right-hand sides of the reverse Holder theorem and the weak-type corollary."""
    G = forest.G if G is None else G
    sc = structure_constants(forest, G)
    binf = characteristic(BInfinity(), sigma, forest, G, index).value
    c_sigma = characteristic(Regularity(), sigma, forest, G, index).value
    ub1 = characteristic(UB1(u), sigma, forest, G, index).value
    r = 1.0 + 1.0 / (2.0 * sc.alpha * binf)
    rh_bound = 2.0 / (1.0 - sc.rho) * c_sigma ** ((r - 1.0) / r)
    weak_bound = ub1 * c_sigma ** (1.0 / (2.0 * sc.alpha * binf + 1.0)) * math.log(math.e + binf)
    return PredictedConstants(rh_bound, weak_bound, r, sc.rho, sc.alpha, c_sigma, binf, ub1)
