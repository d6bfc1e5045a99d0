"""Polar quadrature on the disk aligned with the dyadic generations.

Each generation layer ``r_k < |z| <= r_{k+1}`` carries Gauss-Legendre rings in
the area variable ``s = |z|**2`` and equispaced (trapezoid) angular nodes, with
``arc_nodes`` nodes per generation-``k`` arc so every kube receives the same
node budget.  Cell weights are taken against the normalized area measure, so
they sum exactly to ``r_{G_q}**2``.  The optional boundary cap continues with
``cap_layers`` further generation layers and one last layer reaching ``|z| = 1``,
all at the angular density of generation ``G_q``; the weights then sum to 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .dyadic import DyadicForest, point_generation, radius
from .geometry import norm_kernel

MAX_NODES = 2_000_000


class GridBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    G_q: int = 10
    rings: int = 4
    arc_nodes: int = 8
    min_ring_nodes: int = 256
    safety_radius: float = 0.9
    cap: bool = False
    cap_layers: int = 2
    branching: int = 2

    def refined(self) -> "GridSpec":
        """One refinement step: two more rings per layer and 1.5x the angular density."""
        return replace(self, rings=self.rings + 2, arc_nodes=self.arc_nodes * 3 // 2,
                       min_ring_nodes=self.min_ring_nodes * 3 // 2)


class QuadratureGrid:
    """Nodes, normalized-area cell weights and ring bookkeeping."""

    def __init__(self, spec: GridSpec, ring_radius, ring_count, ring_weight, ring_layer):
        self.spec = spec
        self.ring_radius = np.asarray(ring_radius, dtype=float)
        self.ring_count = np.asarray(ring_count, dtype=np.int64)
        self.ring_weight = np.asarray(ring_weight, dtype=float)
        self.ring_layer = np.asarray(ring_layer, dtype=np.int64)
        self.ring_start = np.concatenate([[0], np.cumsum(self.ring_count)[:-1]])
        rings = np.repeat(np.arange(len(self.ring_count)), self.ring_count)
        local = np.arange(rings.size) - self.ring_start[rings]
        phi = (local + 0.5) * (2.0 * math.pi / self.ring_count[rings])
        self.ring_of = rings
        self.phi = phi
        self.r = self.ring_radius[rings]
        self.z = self.r * np.exp(1j * phi)
        self.weights = self.ring_weight[rings] / self.ring_count[rings]
        self.generation = point_generation(self.r, spec.branching)

    def __len__(self):
        return self.z.size

    @property
    def radius_cut(self) -> float:
        return float(radius(self.spec.G_q, self.spec.branching))

    @property
    def covered_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def rings(self):
        """Iterate ``(ring, slice)`` pairs."""
        for q, (start, count) in enumerate(zip(self.ring_start, self.ring_count)):
            yield q, slice(start, start + count)

    def integrate(self, values) -> complex | float:
        return np.sum(np.asarray(values) * self.weights)

    def inner(self, f, g) -> complex:
        """``<f, g> = int f conj(g) dV`` on the grid."""
        return complex(np.sum(np.asarray(f) * np.conj(g) * self.weights))

    def cell_diameter(self, k: int) -> float:
        """Rough node spacing inside generation ``k``, for Lipschitz sup corrections."""
        m = self.spec.branching
        r0, r1 = radius(k, m), radius(k + 1, m)
        count = self.ring_count[self.ring_layer == k]
        n_phi = count.max() if count.size else self.spec.arc_nodes * m**k
        return float(math.hypot((r1 - r0) / self.spec.rings, 2 * math.pi * r1 / n_phi))


def _ring_nodes(spec: GridSpec, k: int) -> int:
    per_arc = max(spec.arc_nodes, math.ceil(spec.min_ring_nodes / spec.branching**k))
    return per_arc * spec.branching**k


def build_grid(spec: GridSpec | None = None) -> QuadratureGrid:
    spec = GridSpec() if spec is None else spec
    if spec.G_q > 14:
        raise GridBudgetError("G_q > 14 exceeds the node-count guard")
    if spec.rings < 1 or spec.arc_nodes < 1:
        raise ValueError("rings and arc_nodes must be positive")
    m = spec.branching
    x, w = np.polynomial.legendre.leggauss(spec.rings)
    radii, counts, weights, layers = [], [], [], []
    depth = spec.G_q + (spec.cap_layers if spec.cap else 0)
    bounds = [float(radius(k, m)) ** 2 for k in range(depth + 1)]
    segments = [(k, bounds[k], bounds[k + 1], _ring_nodes(spec, min(k, spec.G_q))) for k in range(depth)]
    if spec.cap:
        # generation-G_q angular density all the way to the circle
        segments.append((depth, bounds[-1], 1.0, _ring_nodes(spec, spec.G_q)))
    total = sum(spec.rings * seg[3] for seg in segments)
    if total > MAX_NODES:
        raise GridBudgetError(f"grid would have {total} nodes (> {MAX_NODES})")
    for k, s0, s1, n_phi in segments:
        half = 0.5 * (s1 - s0)
        s = s0 + half * (x + 1.0)
        radii.extend(np.sqrt(s))
        weights.extend(half * w)
        counts.extend([n_phi] * spec.rings)
        layers.extend([k] * spec.rings)
    return QuadratureGrid(spec, radii, counts, weights, layers)


@dataclass
class GridFunction:
    values: np.ndarray
    provenance: str = "custom"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    def __abs__(self):
        return np.abs(self.values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", "re", "im"])
            for i, v in enumerate(self.values):
                writer.writerow([i, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path, grid: QuadratureGrid, provenance="csv"):
        values = np.zeros(len(grid), dtype=complex)
        seen = np.zeros(len(grid), dtype=bool)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                i = int(row["node"])
                values[i] = complex(float(row["re"]), float(row["im"]))
                seen[i] = True
        if not seen.all():
            raise ValueError(f"{path}: {np.count_nonzero(~seen)} grid nodes missing")
        return cls(values, provenance)


def sample(grid: QuadratureGrid, func, provenance="custom") -> GridFunction:
    return GridFunction(np.asarray(func(grid.z), dtype=complex) * np.ones(len(grid)), provenance)


def monomial(grid, m: int, conjugate=False) -> GridFunction:
    z = np.conj(grid.z) if conjugate else grid.z
    return GridFunction(z**m, f"{'conj_' if conjugate else ''}monomial:{m}")


def kernel_function(grid, w: complex, p: float = 2.0) -> GridFunction:
    return GridFunction(norm_kernel(w, grid.z, p), f"kernel:w={w!r},p={p}")


def indicator(grid, mask, name="indicator") -> GridFunction:
    return GridFunction(np.asarray(mask, dtype=float), name)


def parse_function(text: str, grid: QuadratureGrid) -> GridFunction:
    """``monomial:m``, ``conj:m``, ``kernel:w=<complex>[,p=<p>]``, ``disk:<r>`` or ``csv:<path>``."""
    text = text.strip()
    kind, _, arg = text.partition(":")
    try:
        if kind == "monomial":
            return monomial(grid, int(arg))
        if kind == "conj":
            return monomial(grid, int(arg), conjugate=True)
        if kind == "kernel":
            opts = dict(part.split("=", 1) for part in arg.split(","))
            return kernel_function(grid, complex(opts["w"].replace(" ", "")), float(opts.get("p", 2.0)))
        if kind == "disk":
            return indicator(grid, np.abs(grid.z) < float(arg), text)
        if kind == "csv":
            return GridFunction.from_csv(arg, grid, text)
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad function spec {text!r}: {exc}") from exc
    raise ValueError(f"unrecognized function spec {text!r}")


class TentIndex:
    """Node-to-tent incidence for every system and generation ``<= G``.

    ``idx[ell][k][i]`` is the arc index of node ``i`` at generation ``k`` in system
    ``ell``, or ``-1`` when the node lies inside ``r_k`` (outside every tent of
    that generation).
    """

    def __init__(self, forest: DyadicForest, grid: QuadratureGrid, G: int | None = None):
        self.forest = forest
        self.grid = grid
        self.G = forest.G if G is None else min(G, forest.G)
        gen = grid.generation
        theta = np.angle(grid.z)
        self.idx = []
        for system in forest.systems:
            per_gen = []
            for k in range(self.G + 1):
                j = system.angular_index(theta, k).astype(np.int32)
                j[gen < k] = -1
                per_gen.append(j)
            self.idx.append(per_gen)
        # each node's deepest tent, flattened generation by generation
        deepest = np.minimum(gen, self.G)
        m = forest.m
        self._offsets = np.array([(m**k - 1) // (m - 1) for k in range(self.G + 2)])
        self._leaf = []
        for per_gen in self.idx:
            leaf = np.empty(len(grid), dtype=np.int64)
            for k in range(self.G + 1):
                at = deepest == k
                leaf[at] = self._offsets[k] + per_gen[k][at]
            self._leaf.append(leaf)
        self.mass = self.tent_sums(grid.weights)
        self.count = self.tent_sums(np.ones(len(grid)))

    @property
    def M(self):
        return len(self.idx)

    def tent_sums(self, values):
        """Sums of node values over every tent, as ``[ell][k] -> array``.

        Tents are nested, so each node is binned once into its deepest tent and the
        sums are rolled up the tree.
        """
        values = np.asarray(values)
        if np.iscomplexobj(values):
            re, im = self.tent_sums(values.real), self.tent_sums(values.imag)
            return [[a + 1j * b for a, b in zip(ra, rb)] for ra, rb in zip(re, im)]
        m, off = self.forest.m, self._offsets
        values = np.broadcast_to(values, (len(self.grid),)).astype(float, copy=False)
        out = []
        for leaf in self._leaf:
            flat = np.bincount(leaf, values, off[-1])
            rows = [None] * (self.G + 1)
            acc = flat[off[self.G]:off[self.G + 1]]
            rows[self.G] = acc
            for k in range(self.G - 1, -1, -1):
                acc = flat[off[k]:off[k + 1]] + acc.reshape(m**k, m).sum(axis=1)
                rows[k] = acc
            out.append(rows)
        return out

    def tent_averages(self, values):
        """Grid averages over every tent; NaN for tents without nodes."""
        sums = self.tent_sums(np.asarray(values) * self.grid.weights)
        with np.errstate(invalid="ignore", divide="ignore"):
            return [[s / mass for s, mass in zip(rows, mrows)] for rows, mrows in zip(sums, self.mass)]

    def tent_max(self, values):
        values = np.asarray(values, dtype=float)
        out = []
        for per_gen in self.idx:
            rows = []
            for k, j in enumerate(per_gen):
                ok = j >= 0
                t = np.full(self.forest.m**k, -np.inf)
                np.maximum.at(t, j[ok], values[ok])
                rows.append(t)
            out.append(rows)
        return out

    def tent_min(self, values):
        return [[-t for t in rows] for rows in self.tent_max(-np.asarray(values, dtype=float))]

    def chain(self, table, ell: int, fill=np.nan):
        """Gather ``table[ell][k]`` along each node's chain: array ``(N, G+1)``."""
        out = np.full((len(self.grid), self.G + 1), fill, dtype=np.result_type(table[ell][0], float))
        for k, j in enumerate(self.idx[ell]):
            ok = j >= 0
            out[ok, k] = table[ell][k][j[ok]]
        return out

    def tent_members(self, ell: int, k: int):
        """Node index arrays of every generation-``k`` tent of system ``ell``."""
        j = self.idx[ell][k]
        ok = np.flatnonzero(j >= 0)
        order = ok[np.argsort(j[ok], kind="stable")]
        bounds = np.searchsorted(j[order], np.arange(self.forest.m**k + 1))
        return [order[bounds[t]:bounds[t + 1]] for t in range(self.forest.m**k)]

    def tent_mask(self, ell: int, k: int, j: int):
        return self.idx[ell][k] == j

    def kube_mask(self, ell: int, k: int, j: int):
        return (self.grid.generation == k) & (self.idx[ell][k] == j)

    def kube_stats(self, values, reducer):
        """Per-kube reduction (``np.maximum`` or ``np.minimum``) of node values."""
        values = np.asarray(values, dtype=float)
        gen = self.grid.generation
        init = -np.inf if reducer is np.maximum else np.inf
        out = []
        for per_gen in self.idx:
            rows = []
            for k, j in enumerate(per_gen):
                ok = (j >= 0) & (gen == k)
                t = np.full(self.forest.m**k, init)
                reducer.at(t, j[ok], values[ok])
                rows.append(t)
            out.append(rows)
        return out
