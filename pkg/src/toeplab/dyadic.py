"""Dyadic kubes and tents on the unit disk.

A system is built from hyperbolic annuli ``k*theta0 < beta(0, z) <= (k+1)*theta0``
cut into arcs that split by the branching factor ``m = exp(2*theta0)`` at every
generation.  The default ``theta0 = log(2)/2`` gives ``m = 2`` and the exact radii
``r_k = (2**k - 1)/(2**k + 1)``.  Several systems differ by a rotation of the
boundary grid; the default pair uses the one-third shift of the first-generation
arc so that every boundary point is far from a cut in at least one system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import carleson_tent_halfwidth, carleson_tent_measure

TWO_PI = 2.0 * math.pi
DEFAULT_THETA0 = 0.5 * math.log(2.0)


class UnsupportedDimension(NotImplementedError):
    pass


class OutOfTruncation(ValueError):
    """Point lies deeper than the last built generation."""


class TentNotFound(LookupError):
    pass


@dataclass(frozen=True)
class DyadicParams:
    theta0: float = DEFAULT_THETA0
    max_generation: int = 12
    n: int = 1

    def __post_init__(self):
        if self.theta0 <= 0:
            raise ValueError("theta0 must be positive")
        if self.max_generation < 1:
            raise ValueError("max_generation must be >= 1")
        m = math.exp(2.0 * self.theta0)
        if abs(m - round(m)) > 1e-9 or round(m) < 2:
            raise ValueError(
                f"exp(2*theta0) = {m!r} must be an integer >= 2 for arcs to split evenly")

    @property
    def caliber(self) -> float:
        return math.exp(-2.0 * self.theta0)

    @property
    def branching(self) -> int:
        return int(round(math.exp(2.0 * self.theta0)))


class KubeId(NamedTuple):
    system: int
    generation: int
    index: int


@dataclass
class Kube:
    system: int
    generation: int
    index: int
    arc: tuple[float, float]
    center: complex
    parent: KubeId | None = None
    children: list[KubeId] = field(default_factory=list)

    @property
    def id(self) -> KubeId:
        return KubeId(self.system, self.generation, self.index)


# closed forms in the branching factor m -------------------------------------

def radius(k, m=2):
    """``r_k = tanh(k*theta0) = (m**k - 1)/(m**k + 1)``."""
    k = np.asarray(k, dtype=float)
    q = np.power(float(m), -k)
    return (1.0 - q) / (1.0 + q)


def defect(k, m=2):
    """``1 - r_k**2 = 4/(m**k + 2 + m**-k)``, stable for large ``k``."""
    k = np.asarray(k, dtype=float)
    q = np.power(float(m), -k)
    return 4.0 * q / (1.0 + q) ** 2


def tent_measure(k, m=2):
    """Normalized area of a generation-``k`` tent, ``4/(m**k + 1)**2``."""
    return defect(k, m) * np.power(float(m), -np.asarray(k, dtype=float))


def kube_measure(k, m=2):
    k = np.asarray(k, dtype=float)
    return (defect(k, m) - defect(k + 1, m)) * np.power(float(m), -k)


def center_modulus(k, theta0=DEFAULT_THETA0):
    return np.tanh((np.asarray(k, dtype=float) + 0.5) * theta0)


class DyadicSystem:
    """One dyadic system of kubes up to ``params.max_generation``."""

    def __init__(self, params: DyadicParams, system: int, shift: float):
        self.params = params
        self.system = system
        self.shift = shift % TWO_PI
        self.m = params.branching
        G = params.max_generation
        self.radii = radius(np.arange(G + 2), self.m)
        self.layers: list[list[Kube]] = []
        for k in range(G + 1):
            count = self.m**k
            length = TWO_PI / count
            rc = float(center_modulus(k, params.theta0))
            layer = []
            for j in range(count):
                a = self.shift + j * length
                mid = a + 0.5 * length
                parent = None if k == 0 else KubeId(system, k - 1, j // self.m)
                layer.append(Kube(system, k, j, (a, a + length), rc * complex(math.cos(mid), math.sin(mid)), parent))
            self.layers.append(layer)
        for k in range(G):
            for kube in self.layers[k]:
                kube.children = [KubeId(system, k + 1, kube.index * self.m + i) for i in range(self.m)]

    @property
    def max_generation(self) -> int:
        return self.params.max_generation

    def kube(self, k: int, j: int) -> Kube:
        return self.layers[k][j]

    def __iter__(self):
        for layer in self.layers:
            yield from layer

    def __len__(self):
        return sum(len(layer) for layer in self.layers)

    def arc_length(self, k: int) -> float:
        return TWO_PI / self.m**k

    def angular_index(self, theta, k):
        """Arc index at generation ``k`` of the boundary angle ``theta``."""
        t = np.mod(np.asarray(theta, dtype=float) - self.shift, TWO_PI)
        count = self.m ** np.asarray(k)
        j = np.floor(t / TWO_PI * count).astype(np.int64)
        return np.minimum(j, count - 1)

    def generation_of(self, z):
        """Generation of the (untruncated) kube containing ``z``."""
        r = np.abs(np.asarray(z, dtype=complex))
        return point_generation(r, self.m, self.params.theta0)

    def locate_many(self, z):
        """Vectorized ``locate``; returns ``(k, j)`` arrays, ``k`` may exceed the truncation."""
        z = np.asarray(z, dtype=complex)
        k = self.generation_of(z)
        j = self.angular_index(np.angle(z), k)
        return k, j

    def contains(self, outer: KubeId, inner: KubeId) -> bool:
        """Tent nesting: is the tent of ``inner`` inside the tent of ``outer``?"""
        if outer.system != inner.system or inner.generation < outer.generation:
            return False
        return inner.index // self.m ** (inner.generation - outer.generation) == outer.index


def point_generation(r, m=2, theta0=DEFAULT_THETA0):
    """Number of radii ``r_j`` (``j >= 1``) strictly below ``r``.

    Radii are compared directly so that ``r == r_k`` falls in the inner cell.
    """
    r = np.asarray(r, dtype=float)
    beta0 = np.arctanh(np.minimum(r, 1.0 - 1e-16))
    guess = np.floor(beta0 / theta0).astype(np.int64)
    # fix rounding of the guess against the exact radii
    k = np.maximum(guess - 1, 0)
    for _ in range(3):
        k = k + (radius(k + 1, m) < r)
    return k


class DyadicForest:
    """The union of ``M`` rotated dyadic systems sharing one radial structure."""

    def __init__(self, params: DyadicParams, shifts):
        if params.n != 1:
            raise UnsupportedDimension("only the disk (n = 1) has a dyadic backend")
        self.params = params
        self.shifts = [float(s) for s in shifts]
        self.systems = [DyadicSystem(params, ell, s) for ell, s in enumerate(self.shifts)]

    @property
    def m(self) -> int:
        return self.params.branching

    @property
    def G(self) -> int:
        return self.params.max_generation

    @property
    def M(self) -> int:
        return len(self.systems)

    def kube(self, kid: KubeId) -> Kube:
        return self.systems[kid.system].kube(kid.generation, kid.index)

    def kubes(self, G: int | None = None):
        G = self.G if G is None else G
        for system in self.systems:
            for layer in system.layers[: G + 1]:
                yield from layer

    def radius(self, k):
        return radius(k, self.m)

    def tent_measure(self, k):
        return tent_measure(k, self.m)

    def kube_measure(self, k):
        return kube_measure(k, self.m)

    def to_dict(self) -> dict:
        systems = []
        for system in self.systems:
            gens = []
            for layer in system.layers:
                gens.append({
                    "arcs": [[kube.arc[0], kube.arc[1]] for kube in layer],
                    "parent": [None if kube.parent is None else kube.parent.index for kube in layer],
                })
            systems.append({"shift": system.shift, "generations": gens})
        return {
            "params": {"theta0": self.params.theta0, "max_generation": self.G, "n": self.params.n},
            "branching": self.m,
            "radii": [float(r) for r in radius(np.arange(self.G + 2), self.m)],
            "systems": systems,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "DyadicForest":
        params = DyadicParams(**doc["params"])
        forest = cls(params, [s["shift"] for s in doc["systems"]])
        for system, sdoc in zip(forest.systems, doc["systems"]):
            for layer, gdoc in zip(system.layers, sdoc["generations"]):
                arcs = np.array([kube.arc for kube in layer])
                if not np.allclose(arcs, np.array(gdoc["arcs"]), atol=1e-12):
                    raise ValueError("serialized arcs disagree with the rebuilt forest")
        return forest

    @classmethod
    def from_json(cls, text: str) -> "DyadicForest":
        return cls.from_dict(json.loads(text))


def default_shifts(params: DyadicParams, M: int) -> list[float]:
    """Shifts ``ell/3`` of the first-generation arc, ``ell = 0..M-1``."""
    first_arc = TWO_PI / params.branching
    return [ell * first_arc / 3.0 for ell in range(M)]


def build_forest(params: DyadicParams | None = None, M: int = 2, shifts=None) -> DyadicForest:
    params = DyadicParams() if params is None else params
    if params.n != 1:
        raise UnsupportedDimension("only the disk (n = 1) has a dyadic backend")
    if M < 1:
        raise ValueError("M must be >= 1")
    return DyadicForest(params, default_shifts(params, M) if shifts is None else shifts)


def locate(z, system: DyadicSystem) -> KubeId:
    k, j = system.locate_many(complex(z))
    k, j = int(k), int(j)
    if k > system.max_generation:
        raise OutOfTruncation(f"|z| = {abs(z)} lies in generation {k} > {system.max_generation}")
    return KubeId(system.system, k, j)


@dataclass(frozen=True)
class TentGeometry:
    tent_measure: float
    kube_measure: float
    inner_radius: float
    arc: tuple[float, float]


def tent_geometry(kube: Kube, forest: DyadicForest) -> TentGeometry:
    k = kube.generation
    return TentGeometry(
        tent_measure=float(forest.tent_measure(k)),
        kube_measure=float(forest.kube_measure(k)),
        inner_radius=float(forest.radius(k)),
        arc=kube.arc,
    )


@dataclass
class StructureConstants:
    rho: float
    rho_generation: int
    alpha: float
    alpha_generation: int
    kube_tent_min: float
    kube_tent_max: float
    tent_center_min: float
    tent_center_max: float
    G: int

    @property
    def comparability_spread(self) -> float:
        return self.tent_center_max / self.tent_center_min

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["comparability_spread"] = self.comparability_spread
        return d


def structure_constants(forest: DyadicForest, G: int | None = None) -> StructureConstants:
    """Sparseness ``rho``, doubling ``alpha`` and comparability spreads up to generation ``G``.

    ``alpha`` ranges over parent generations ``k <= G``; all values are closed forms.
    """
    G = forest.G if G is None else G
    m = forest.m
    k = np.arange(G + 1)
    tents = tent_measure(k, m)
    kubes = kube_measure(k, m)
    sparse = 1.0 - kubes / tents
    doubling = tents / tent_measure(k + 1, m)
    n = forest.params.n
    vs_center = tents / (1.0 - center_modulus(k, forest.params.theta0) ** 2) ** (n + 1)
    ratio = kubes / tents
    return StructureConstants(
        rho=float(sparse.max()), rho_generation=int(sparse.argmax()),
        alpha=float(doubling.max()), alpha_generation=int(doubling.argmax()),
        kube_tent_min=float(ratio.min()), kube_tent_max=float(ratio.max()),
        tent_center_min=float(vs_center.min()), tent_center_max=float(vs_center.max()),
        G=G,
    )


@dataclass(frozen=True)
class TentApproximation:
    system: int
    kube: KubeId
    ratio: float


def _covering_index(system: DyadicSystem, phi: float, half: float, k: int):
    length = system.arc_length(k)
    t = (phi - half - system.shift) % TWO_PI
    j = int(math.floor(t / length))
    if j >= system.m**k:
        j = system.m**k - 1
    if t - j * length + 2.0 * half <= length:
        return j
    return None


def approx_tent(z, forest: DyadicForest, G: int | None = None) -> TentApproximation:
    """Smallest dyadic tent (over all systems) containing the Carleson tent over ``z``.

    Containment is decided analytically: the Carleson tent lies in ``|w| > |z|``
    and in the angular window ``arg z +- arcsin(1 - |z|)``.
    """
    G = forest.G if G is None else G
    z = complex(z)
    r = abs(z)
    if r == 0.0:
        return TentApproximation(0, KubeId(0, 0, 0), 1.0)
    phi = math.atan2(z.imag, z.real)
    half = float(carleson_tent_halfwidth(z))
    area = float(carleson_tent_measure(z))
    best = None
    for system in forest.systems:
        for k in range(G, 0, -1):
            if forest.radius(k) > r:
                continue
            j = _covering_index(system, phi, half, k)
            if j is not None:
                measure = float(forest.tent_measure(k))
                if best is None or measure < best[0]:
                    best = (measure, KubeId(system.system, k, j))
                break
    if best is None:
        best = (1.0, KubeId(0, 0, 0))
    if best[1].generation == 0 and area <= 0:
        raise TentNotFound(f"no covering tent for {z}")
    return TentApproximation(best[1].system, best[1], best[0] / area)
