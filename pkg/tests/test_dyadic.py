import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplab.dyadic import (DyadicForest, DyadicParams, KubeId, OutOfTruncation, UnsupportedDimension,
                            approx_tent, build_forest, defect, kube_measure, locate, point_generation, radius,
                            structure_constants, tent_measure)


def test_radii_match_oracle(oracle):
    k = np.arange(14)
    np.testing.assert_allclose(radius(k), oracle["radius"], rtol=0, atol=1e-15)


def test_tent_and_kube_measures(oracle):
    k = np.arange(14)
    np.testing.assert_allclose(tent_measure(k), np.array(oracle["tent_measure"]) * 2.0 ** -k, rtol=1e-13)
    np.testing.assert_allclose(defect(k), oracle["tent_measure"], rtol=1e-13)
    np.testing.assert_allclose(kube_measure(np.arange(13)), np.array(oracle["kube_measure"]) * 2.0 ** -np.arange(13),
                               rtol=1e-12)


def test_tent_measure_closed_form():
    k = np.arange(20)
    np.testing.assert_allclose(tent_measure(k), 4.0 / (2.0**k + 1) ** 2, rtol=1e-14)


def test_children_tile_parent(forest):
    system = forest.systems[0]
    for kube in system.layers[3]:
        child_arcs = [forest.kube(c).arc for c in kube.children]
        assert child_arcs[0][0] == pytest.approx(kube.arc[0])
        assert child_arcs[-1][1] == pytest.approx(kube.arc[1])
        assert all(forest.kube(c).parent == kube.id for c in kube.children)


def test_kube_count(forest):
    assert len(list(forest.kubes(4))) == forest.M * (2**5 - 1)


def test_unsupported_dimension():
    with pytest.raises(UnsupportedDimension):
        build_forest(DyadicParams(n=2))


def test_non_integer_branching_rejected():
    with pytest.raises(ValueError):
        DyadicParams(theta0=0.4)


def test_branching_three():
    forest = build_forest(DyadicParams(np.log(3.0) / 2.0, 5))
    assert forest.m == 3
    np.testing.assert_allclose(radius(2, 3), 0.8)


FOREST = build_forest()


@given(st.floats(0.0, 0.9995), st.floats(-np.pi, np.pi))
@settings(max_examples=200, deadline=None)
def test_locate_agrees_with_radii(r, t):
    z = r * np.exp(1j * t)
    kid = locate(z, FOREST.systems[0])
    assert radius(kid.generation) <= r + 1e-15
    assert r <= radius(kid.generation + 1) + 1e-15


def test_point_generation_boundary_convention():
    # r == r_k belongs to the inner cell
    assert point_generation(radius(3)) == 2
    assert point_generation(0.0) == 0


def test_locate_out_of_truncation(forest):
    with pytest.raises(OutOfTruncation):
        locate(0.99999, forest.systems[0])


def test_contains(forest):
    s = forest.systems[0]
    assert s.contains(KubeId(0, 1, 1), KubeId(0, 3, 5))
    assert not s.contains(KubeId(0, 1, 0), KubeId(0, 3, 5))
    assert not s.contains(KubeId(0, 3, 5), KubeId(0, 1, 1))


def test_json_round_trip(forest):
    text = forest.to_json()
    again = DyadicForest.from_json(text)
    assert again.M == forest.M and again.G == forest.G
    assert again.shifts == pytest.approx(forest.shifts)
    doc = json.loads(text)
    doc["systems"][0]["generations"][2]["arcs"][0][0] += 0.1
    with pytest.raises(ValueError):
        DyadicForest.from_dict(doc)


def test_structure_constants(forest, oracle):
    sc = structure_constants(forest, 12)
    assert sc.rho == pytest.approx(oracle["rho"], abs=1e-12)
    assert sc.rho_generation == 0
    assert sc.alpha == pytest.approx(oracle["alpha_G12"], abs=1e-12)
    assert sc.alpha < 4.0
    assert structure_constants(forest, 0).alpha == pytest.approx(oracle["alpha_k0"] * 2, abs=1e-12)
    assert sc.comparability_spread < 4.0


def test_alpha_approaches_four(forest):
    alphas = [structure_constants(forest, G).alpha for G in range(1, 13)]
    assert np.all(np.diff(alphas) > 0)
    assert alphas[-1] < 4.0


def test_approx_tent_origin_and_ratio(forest):
    assert approx_tent(0.0, forest).kube == KubeId(0, 0, 0)
    rng = np.random.default_rng(3)
    for z in rng.uniform(0, 0.99, 50) * np.exp(2j * np.pi * rng.uniform(size=50)):
        approx = approx_tent(z, forest)
        assert 1.0 <= approx.ratio <= 64.0
