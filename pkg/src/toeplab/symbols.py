"""Bounded symbols ``u`` with tent-sup estimators.

A symbol carries an evaluator and optionally an exact tent sup: a callable
``(k, a, b) -> sup |u|`` over the sector ``{|w| > r_k, arg w in [a, b)}`` for
arrays of arc endpoints at generation ``k``.  Without it, tent sups are sampled on
a quadrature grid (a lower bound), optionally corrected by ``L*h`` when a
Lipschitz modulus ``L`` is known.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .dyadic import TWO_PI


class Symbol:
    def __init__(self, evaluator, name="custom", exact_sup=None, lipschitz=None,
                 boundary=None, continuous=True):
        self.evaluator = evaluator
        self.name = name
        self.exact_sup = exact_sup
        self.lipschitz = lipschitz
        self.boundary = boundary
        self.continuous = continuous

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.asarray(self.evaluator(z), dtype=complex) * np.ones(z.shape)

    def __repr__(self):
        return f"Symbol({self.name})"

    def tent_sups(self, forest, G=None, index=None, strategy=None):
        """``||u||_{L^inf(K^)}`` for every tent up to generation ``G`` as ``[ell][k] -> array``.

        ``strategy`` is ``"exact"``, ``"sampled"`` or ``"lipschitz"``; the default
        is the best one available.  Sampled strategies need a ``TentIndex``.
        """
        G = (forest.G if index is None else index.G) if G is None else G
        if strategy is None:
            strategy = "exact" if self.exact_sup is not None else (
                "lipschitz" if self.lipschitz is not None else "sampled")
        if strategy == "exact":
            if self.exact_sup is None:
                raise ValueError(f"{self.name} has no exact tent sup")
            out = []
            for system in forest.systems:
                rows = []
                for k in range(G + 1):
                    length = TWO_PI / forest.m**k
                    a = system.shift + length * np.arange(forest.m**k)
                    rows.append(np.asarray(self.exact_sup(k, a, a + length), dtype=float)
                                * np.ones(forest.m**k))
                out.append(rows)
            return out
        if index is None:
            raise ValueError(f"strategy {strategy!r} needs a TentIndex")
        sampled = [rows[: G + 1] for rows in index.tent_max(np.abs(self(index.grid.z)))]
        if strategy == "sampled":
            return sampled
        if strategy == "lipschitz":
            if self.lipschitz is None:
                raise ValueError(f"{self.name} has no Lipschitz modulus")
            return [[t + self.lipschitz * index.grid.cell_diameter(k) for k, t in enumerate(rows)]
                    for rows in sampled]
        raise ValueError(f"unknown tent-sup strategy {strategy!r}")


def _arc_meets(a, b, lo, hi):
    """Does ``[a, b)`` meet the open arc ``(lo, hi)`` on the circle (``hi - lo < 2 pi``)?"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    start = np.mod(a - lo, TWO_PI)
    width = hi - lo
    full = (b - a) >= TWO_PI - 1e-15
    return full | (start < width) | (start + (b - a) > TWO_PI)


def _inner_defect(lo, hi):
    """``1 - r_k**2`` of the tent over ``[lo, hi)``, using ``m**k = 2 pi / length``."""
    count = TWO_PI / (np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float))
    return 4.0 * count / (count + 1.0) ** 2


def one() -> Symbol:
    return constant(1.0)


def constant(c: float) -> Symbol:
    c = complex(c)
    return Symbol(lambda z: np.full(z.shape, c), f"const:{c.real:g}" if c.imag == 0 else f"const:{c}",
                  exact_sup=lambda k, a, b: abs(c), lipschitz=0.0, boundary=lambda zeta: np.full(np.shape(zeta), c))


def vanishing(a: float) -> Symbol:
    """``(1 - |z|**2)**a``, vanishing at the boundary for ``a > 0``."""
    if a <= 0:
        raise ValueError("vanishing symbol needs a > 0")
    return Symbol(lambda z: (1.0 - np.abs(z) ** 2) ** a, f"vanishing:{a:g}",
                  exact_sup=lambda k, lo, hi: _inner_defect(lo, hi) ** a,
                  boundary=lambda zeta: np.zeros(np.shape(zeta)))


def modulus_power(e: float) -> Symbol:
    """``|z|**e``; ``e = 2`` is the radial symbol ``|w|**2``."""
    if e < 0:
        raise ValueError("power symbol needs e >= 0")
    return Symbol(lambda z: np.abs(z) ** e, f"power:e={e:g}",
                  exact_sup=lambda k, lo, hi: 1.0,
                  boundary=lambda zeta: np.ones(np.shape(zeta)))


def monomial(m: int) -> Symbol:
    if m < 0:
        raise ValueError("monomial degree must be >= 0")
    return Symbol(lambda z: z**m, f"monomial:{m}", exact_sup=lambda k, lo, hi: 1.0,
                  boundary=lambda zeta: np.asarray(zeta) ** m)


def halfplane() -> Symbol:
    """Indicator of ``Re z > 0``; discontinuous on the imaginary axis."""
    return Symbol(lambda z: (z.real > 0).astype(float), "halfplane",
                  exact_sup=lambda k, lo, hi: _arc_meets(lo, hi, -0.5 * math.pi, 0.5 * math.pi).astype(float),
                  boundary=lambda zeta: (np.real(zeta) > 0).astype(float), continuous=False)


def annulus(r1: float, r2: float) -> Symbol:
    if not 0 <= r1 < r2 <= 1:
        raise ValueError("annulus needs 0 <= r1 < r2 <= 1")

    def sup(k, lo, hi):
        return (r2 ** 2 > 1.0 - _inner_defect(lo, hi)).astype(float)

    return Symbol(lambda z: ((np.abs(z) > r1) & (np.abs(z) < r2)).astype(float), f"indicator:annulus({r1:g},{r2:g})",
                  exact_sup=sup,
                  boundary=lambda zeta: np.full(np.shape(zeta), float(r2 >= 1.0)), continuous=False)


_PATTERNS = [
    (re.compile(r"^one$"), lambda: one()),
    (re.compile(r"^const:(?P<c>[-+0-9.eE]+)$"), lambda c: constant(float(c))),
    (re.compile(r"^power:(?:e=)?(?P<e>[-+0-9.eE]+)$"), lambda e: modulus_power(float(e))),
    (re.compile(r"^monomial:(?P<m>\d+)$"), lambda m: monomial(int(m))),
    (re.compile(r"^vanishing:(?:a=)?(?P<a>[-+0-9.eE]+)$"), lambda a: vanishing(float(a))),
    (re.compile(r"^halfplane$"), lambda: halfplane()),
    (re.compile(r"^indicator:annulus\((?P<r1>[0-9.eE+-]+),\s*(?P<r2>[0-9.eE+-]+)\)$"),
     lambda r1, r2: annulus(float(r1), float(r2))),
]


def parse_symbol(text: str) -> Symbol:
    """Parse the symbol mini-language, e.g. ``vanishing:a=0.5`` or ``indicator:annulus(0.2,0.6)``."""
    text = text.strip()
    for pattern, build in _PATTERNS:
        match = pattern.match(text)
        if match:
            return build(**match.groupdict())
    raise ValueError(f"unrecognized symbol spec {text!r}")
