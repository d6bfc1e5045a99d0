import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplab.orlicz import YoungFunction, cphi, orlicz_norm, power_luxemburg


def test_young_conjugate_and_kappa():
    y = YoungFunction(2.0)
    assert y.conjugate == pytest.approx(2.0)
    assert y.kappa == pytest.approx(0.25)
    # Young's inequality st <= Phi(s) + Psi(t), equality on the curve t = Phi'(s)
    s = np.linspace(0.1, 3, 20)
    t = 2 * s
    np.testing.assert_allclose(s * t, y.phi(s) + y.psi(t))
    np.testing.assert_allclose(y.psi_inv(y.psi(t)), t)


def test_young_rejects_bad_input():
    with pytest.raises(ValueError):
        YoungFunction(1.0)
    with pytest.raises(ValueError):
        YoungFunction(2.0, "exp")


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=30), st.floats(1.1, 6.0))
@settings(max_examples=100, deadline=None)
def test_luxemburg_matches_power_closed_form(values, r):
    values = np.array(values)
    w = np.linspace(1.0, 2.0, values.size)
    exact = power_luxemburg(values, w, r)
    bisected = orlicz_norm(values, w, YoungFunction(r))
    assert bisected == pytest.approx(exact, rel=1e-8, abs=1e-300)


def test_luxemburg_homogeneous():
    v, w = np.array([1.0, 2.0, 5.0]), np.ones(3)
    y = YoungFunction(3.0)
    assert orlicz_norm(3 * v, w, y) == pytest.approx(3 * orlicz_norm(v, w, y))
    with pytest.raises(ValueError):
        orlicz_norm(v, np.zeros(3), y)


@pytest.mark.parametrize("rp", ["2", "10", "100", "1000"])
def test_cphi_matches_oracle(oracle, rp):
    value = cphi(float(rp) / (float(rp) - 1), 8 / 9, 1.05)
    assert value.c_phi == pytest.approx(oracle["cphi"][rp], rel=1e-10)
    assert value.c_phi_exact == pytest.approx(oracle["cphi_exact"][rp], rel=1e-10)


def test_cphi_log_law_window():
    ratios = [cphi(rp / (rp - 1), 8 / 9, 1.05).ratio_to_log for rp in (2, 10, 100, 1000)]
    assert max(ratios) / min(ratios) <= 10
    assert cphi(2.0, 8 / 9, 1.05).ratio_to_log == pytest.approx(cphi(2.0, 8 / 9, 1.05).c_phi / (1 + math.log(2)))


def test_cphi_parameter_errors():
    with pytest.raises(ValueError):
        cphi(2.0, 8 / 9, 1.2)
    with pytest.raises(ValueError):
        cphi(2.0, 8 / 9, 1.0)
    with pytest.raises(ValueError):
        cphi(1.0, 8 / 9, 1.05)
