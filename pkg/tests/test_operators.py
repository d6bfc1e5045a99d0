import warnings

import numpy as np
import pytest

from toeplab import symbols
from toeplab.dyadic import KubeId
from toeplab.geometry import norm_kernel
from toeplab.operators import (AccuracyWarning, berezin, maximal, norms, project, sparse_apply, strong_norm,
                               tent_luxemburg, toeplitz, toeplitz_grid, truncation_error_bar, weak_norm)
from toeplab.orlicz import YoungFunction
from toeplab.quadrature import GridSpec, build_grid

POINTS = 0.8 * np.exp(1j * np.linspace(0, 2 * np.pi, 7, endpoint=False))
POINTS = np.concatenate([[0.0, 0.3 + 0.1j, -0.5j], POINTS])


@pytest.mark.parametrize("m", range(7))
def test_projection_reproduces_monomials(grid, m):
    values = project(grid.z**m, grid, POINTS, safety=0.81)
    np.testing.assert_allclose(values, POINTS**m, rtol=1e-10, atol=1e-12)


def test_projection_kills_antiholomorphic(grid, lab):
    assert np.max(np.abs(project(np.conj(grid.z), grid, POINTS, safety=0.81))) < 1e-12
    assert np.max(np.abs(lab.projector.apply(np.conj(grid.z) ** 2))) < 1e-12


def test_toeplitz_radial_symbol_on_constant(grid, lab):
    u = symbols.modulus_power(2)
    np.testing.assert_allclose(toeplitz(u, np.ones(len(grid)), grid, POINTS, safety=0.81), 0.5, atol=1e-12)
    np.testing.assert_allclose(toeplitz_grid(u, np.ones(len(grid)), lab.projector), 0.5, atol=1e-12)


def test_reproducing_kernel_norm(grid):
    for z in (0.0, 0.5, 0.8j, 0.9):
        k = norm_kernel(z, grid.z)
        assert grid.inner(k, k).real == pytest.approx(1.0, abs=1e-6)


def test_direct_and_spectral_agree(grid, lab):
    f = (1.0 + grid.z) * np.abs(grid.z) ** 2
    spectral = lab.projector.apply(f)
    keep = np.flatnonzero(np.abs(grid.z) < 0.8)[::997]
    direct = project(f, grid, grid.z[keep], safety=0.81)
    np.testing.assert_allclose(spectral[keep], direct, atol=1e-12)


def test_spectral_evaluate_off_grid(lab):
    f = lab.grid.z**3 + 2
    moments = lab.projector.moments(f)
    np.testing.assert_allclose(lab.projector.evaluate(moments, POINTS), POINTS**3 + 2, atol=1e-10)


def test_projection_warns_beyond_safety(grid):
    with pytest.warns(AccuracyWarning):
        project(np.ones(len(grid)), grid, 0.95)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        project(np.ones(len(grid)), grid, 0.5)


def test_adjoint_route(grid):
    u = symbols.halfplane()
    z = np.array([0.4, -0.4])
    np.testing.assert_allclose(toeplitz(u, grid.z, grid, z, adjoint=True), [0.4, 0.0], atol=1e-12)


def test_berezin_modsq_closed_form(grid, oracle):
    u = symbols.modulus_power(2)
    assert berezin(u, np.sqrt(0.5), grid).real == pytest.approx(oracle["berezin_modsq_half"], abs=1e-9)
    assert berezin(u, 0.5j, grid).real == pytest.approx(oracle["berezin_modsq_quarter"], abs=1e-9)
    assert berezin(symbols.vanishing(1.0), np.sqrt(0.5), grid).real == pytest.approx(
        oracle["berezin_vanishing1_half"], abs=1e-9)


def test_berezin_routes_agree(grid):
    z = np.array([0.0, 0.3, 0.5 + 0.5j, -0.8, 0.8j])
    for u in (symbols.modulus_power(2), symbols.vanishing(1.0), symbols.halfplane()):
        kernel_route = berezin(u, z, grid, route="kernel")
        invariance = berezin(u, z, grid)
        np.testing.assert_allclose(kernel_route, invariance, atol=5e-3)


def test_berezin_of_constant_is_constant(grid):
    np.testing.assert_allclose(berezin(symbols.constant(2.0), [0.0, 0.9, 0.99], grid), 2.0, atol=1e-10)


def test_berezin_route_errors(grid):
    with pytest.raises(ValueError):
        berezin(symbols.one(), 0.9995, grid)
    with pytest.raises(ValueError):
        berezin(symbols.one(), 0.5, grid, route="other")


def test_sparse_operator_on_constant(index, grid):
    # S_1 1 = number of tents containing the point, summed over systems
    s = sparse_apply(symbols.one(), np.ones(len(grid)), index)
    expected = sum((idx >= 0).astype(int) for per_gen in index.idx for idx in per_gen)
    np.testing.assert_allclose(s, expected, rtol=1e-12)


def test_sparse_operator_off_grid(index):
    value = sparse_apply(symbols.one(), np.ones(len(index.grid)), index, z=0.0)
    assert value == pytest.approx(index.M)


def test_maximal_global_of_indicator(index, grid):
    f = (np.abs(grid.z) < 1 / 3).astype(float)
    m = maximal("global", f, index)
    # root-kube points see only the whole disk
    np.testing.assert_allclose(m[f > 0], 1 / 9, rtol=1e-10)
    assert np.all(m <= 1.0 + 1e-12)
    assert maximal("global", f, index, z=0.0) == pytest.approx(1 / 9, rel=1e-10)


def test_maximal_localized_support(index, grid):
    kube = KubeId(0, 2, 1)
    m = maximal("K", np.ones(len(grid)), index, kube=kube)
    inside = index.tent_mask(0, 2, 1)
    np.testing.assert_allclose(m[inside], 1.0)
    assert np.all(m[~inside] == 0.0)
    with pytest.raises(ValueError):
        maximal("K", np.ones(len(grid)), index)


def test_maximal_u_and_sigma(index, grid):
    f = np.abs(grid.z) ** 2
    mu = maximal("u", f, index, u=symbols.vanishing(1.0))
    assert np.all(mu <= maximal("global", f, index) + 1e-12)
    ms = maximal("sigma", np.ones(len(grid)), index, sigma=lambda z: 1.0 / (1.1 - np.abs(z)))
    np.testing.assert_allclose(ms, 1.0, rtol=1e-12)
    with pytest.raises(ValueError):
        maximal("u", f, index)
    with pytest.raises(ValueError):
        maximal("nope", f, index)


def test_maximal_u_r_dominates_u(index, grid):
    f = np.abs(grid.z - 0.5)
    u = symbols.one()
    assert np.all(maximal("u_r", f, index, u=u, r=2.0) >= maximal("u", f, index, u=u) - 1e-12)
    np.testing.assert_allclose(maximal("u_phi", f, index, u=u, young=YoungFunction(2.0)),
                               maximal("u_r", f, index, u=u, r=2.0))


def test_tent_luxemburg_exact_matches_power(lab):
    small = build_grid(GridSpec(G_q=5))
    from toeplab.quadrature import TentIndex
    index = TentIndex(lab.forest, small, 4)
    f = np.abs(small.z) + 0.1
    fast = tent_luxemburg(f, index, YoungFunction(3.0))
    exact = tent_luxemburg(f, index, YoungFunction(3.0), exact=True)
    for k in range(5):
        np.testing.assert_allclose(exact[0][k], fast[0][k], rtol=1e-8)


def test_strong_and_weak_norms(grid):
    one = np.ones(len(grid))
    assert strong_norm(one, grid, 2.0) == pytest.approx(1.0, abs=1e-13)
    assert weak_norm(one, grid) == pytest.approx(1.0, abs=1e-12)
    # layer boundaries are exact: |z| < r_2 = 0.6 has mass 0.36
    half = (np.abs(grid.z) < 0.6).astype(float)
    assert weak_norm(half, grid) == pytest.approx(0.36, abs=1e-12)
    assert weak_norm(3 * half, grid) == pytest.approx(1.08, abs=1e-12)
    assert weak_norm(half, grid, R=0.9) == 0.0
    # weak norm never exceeds the L1 norm
    f = np.abs(norm_kernel(0.7, grid.z))
    assert weak_norm(f, grid) <= strong_norm(f, grid, 1.0) + 1e-12


def test_norms_dispatch(grid):
    f = grid.z
    assert norms(f, grid) == strong_norm(f, grid)
    assert norms(f, grid, "weak_tail", R=0.5) == weak_norm(f, grid, R=0.5)
    assert norms(f, grid, "strong_tail", R=0.5) < norms(f, grid)
    with pytest.raises(ValueError):
        norms(f, grid, "bad")


def test_truncation_error_bar():
    plain = build_grid(GridSpec())
    assert truncation_error_bar(plain, 1.0, 1.0) == pytest.approx(np.sqrt(1 - plain.covered_mass))
