import numpy as np
import pytest

from toeplab.dyadic import build_forest, defect
from toeplab.symbols import annulus, halfplane, modulus_power, one, parse_symbol, vanishing


def test_exact_sup_dominates_samples(forest, index):
    for u in (one(), vanishing(0.5), vanishing(2.0), modulus_power(2), halfplane(), annulus(0.2, 0.6)):
        exact = u.tent_sups(forest, index.G)
        sampled = u.tent_sups(forest, index.G, index, "sampled")
        for ell in range(forest.M):
            for k in range(index.G + 1):
                assert np.all(exact[ell][k] >= sampled[ell][k] - 1e-12), (u.name, k)


def test_vanishing_sup_closed_form(forest):
    sup = vanishing(1.0).tent_sups(forest, 8)
    for k in range(9):
        np.testing.assert_allclose(sup[0][k], defect(k), rtol=1e-12)


def test_vanishing_sup_branching_three():
    from toeplab.dyadic import DyadicParams
    forest = build_forest(DyadicParams(np.log(3.0) / 2.0, 4))
    sup = vanishing(1.0).tent_sups(forest, 4)
    np.testing.assert_allclose(sup[0][2], defect(2, 3), rtol=1e-12)


def test_halfplane_sup(forest):
    sup = halfplane().tent_sups(forest, 3)
    assert sup[0][0][0] == 1.0
    # some generation-3 arcs lie in the left half-plane
    assert 0 < sup[0][3].sum() < 8


def test_lipschitz_strategy_adds_slack(forest, index):
    u = one()
    sups = u.tent_sups(forest, 4, index, "lipschitz")
    assert sups[0][2][0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        vanishing(1.0).tent_sups(forest, 4, index, "lipschitz")
    with pytest.raises(ValueError):
        vanishing(1.0).tent_sups(forest, 4, None, "sampled")


def test_boundary_values():
    zeta = np.exp(1j * np.array([0.0, np.pi]))
    np.testing.assert_allclose(halfplane().boundary(zeta), [1.0, 0.0])
    np.testing.assert_allclose(vanishing(0.5).boundary(zeta), 0.0)


@pytest.mark.parametrize("text,name", [
    ("one", "const:1"), ("const:2.5", "const:2.5"), ("power:e=2", "power:e=2"), ("monomial:3", "monomial:3"),
    ("vanishing:a=0.5", "vanishing:0.5"), ("vanishing:1", "vanishing:1"), ("halfplane", "halfplane"),
    ("indicator:annulus(0.2,0.6)", "indicator:annulus(0.2,0.6)"),
])
def test_parse_symbol(text, name):
    assert parse_symbol(text).name == name


def test_parse_symbol_errors():
    for bad in ("vanishing:a=-1", "nonsense", "indicator:annulus(0.7,0.2)"):
        with pytest.raises(ValueError):
            parse_symbol(bad)
