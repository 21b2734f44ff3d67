import math

import numpy as np
import pytest

from bellman_mt.errors import DomainError
from bellman_mt.special_functions import (
    PlanePoint,
    exponent_params,
    f_p,
    f_p_branches,
    f_p_partials,
    g_p,
    h_max,
    h_min,
    lambda_p,
    lambda_p_taylor,
    phi_max,
    phi_min,
    u_p,
)


def test_exponent_params_values():
    pr = exponent_params(3)
    assert pr.p_conj == pytest.approx(1.5)
    assert pr.p_star == 3
    assert pr.beta == pytest.approx(8.0)
    assert pr.k == pytest.approx(4.0 / 3.0)
    low = exponent_params(4 / 3)
    assert low.p_star == pytest.approx(4.0)
    assert low.beta == pytest.approx(3 ** (4 / 3))


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, math.inf, math.nan])
def test_exponent_params_rejects(p):
    with pytest.raises(DomainError):
        exponent_params(p)


def test_f_p_at_two_is_difference_of_squares():
    z1 = np.array([0.0, 1.0, 2.0, 0.3])
    z2 = np.array([1.0, 1.0, 0.5, 4.0])
    assert np.allclose(f_p(z1, z2, 2.0), z1**2 - z2**2, rtol=0, atol=1e-15)


def test_f_p_hand_values():
    # p = 3: power branch below z1 = 2 z2, product branch k (z1+z2)^2 (z1 - 2 z2) above
    assert f_p(1.0, 1.0, 3) == pytest.approx(1 - 8)
    assert f_p(1.0, 0.0, 3) == pytest.approx(4.0 / 3.0)
    assert f_p(3.0, 1.0, 3) == pytest.approx(4.0 / 3.0 * 16 * 1)
    # p = 3/2 has the cone z1 = 2 z2 with the power branch above it
    pr = exponent_params(1.5)
    assert f_p(3.0, 1.0, pr) == pytest.approx(3**1.5 - pr.beta)
    assert f_p(1.0, 1.0, pr) == pytest.approx(pr.k * 2**0.5 * (1 - 2))


@pytest.mark.parametrize("p", [1.2, 1.5, 4 / 3, 2.5, 3, 4, 8])
def test_f_p_continuous_and_c1_on_cone(p):
    pr = exponent_params(p)
    z2 = np.linspace(0.1, 3, 25)
    z1 = pr.q * z2
    power, product = f_p_branches(z1, z2, pr)
    # both sides cancel terms of size z1**p
    assert np.all(np.abs(power - product) <= 1e-12 * np.maximum(1.0, z1**p))
    lo = np.array(f_p_partials(z1 * (1 - 1e-7), z2, pr))
    hi = np.array(f_p_partials(z1 * (1 + 1e-7), z2, pr))
    assert np.allclose(lo, hi, rtol=1e-5, atol=1e-5)


@pytest.mark.parametrize("p", [1.5, 3, 4])
def test_f_p_partials_match_differences(p):
    pr = exponent_params(p)
    rng = np.random.default_rng(0)
    z1 = rng.uniform(0.2, 2, 50)
    z2 = rng.uniform(0.2, 2, 50)
    h = 1e-6
    d1, d2 = f_p_partials(z1, z2, pr)
    n1 = (f_p(z1 + h, z2, pr) - f_p(z1 - h, z2, pr)) / (2 * h)
    n2 = (f_p(z1, z2 + h, pr) - f_p(z1, z2 - h, pr)) / (2 * h)
    assert np.allclose(d1, n1, rtol=1e-6, atol=1e-6)
    assert np.allclose(d2, n2, rtol=1e-6, atol=1e-6)


def test_f_p_rejects_negative():
    with pytest.raises(DomainError):
        f_p(-1.0, 1.0, 3)


def test_g_p_continuous_but_kinked():
    p = 3.0
    z2 = 1.0
    z1 = (p - 1) * z2
    assert g_p(z1 - 1e-12, z2, p) == pytest.approx(g_p(z1 + 1e-12, z2, p), abs=1e-9)
    h = 1e-6
    left = (g_p(z1, z2, p) - g_p(z1 - h, z2, p)) / h
    right = (g_p(z1 + h, z2, p) - g_p(z1, z2, p)) / h
    assert abs(left - right) > 1.0


def test_u_p_hand_values():
    assert u_p(PlanePoint(0.0, 1.0), 3) == pytest.approx(4.0 / 3.0)
    assert u_p(PlanePoint(1.0, 2.0), 3) == pytest.approx(0.0)
    assert u_p(-1.0, 3, x2=-2.0) == pytest.approx(0.0)


def test_h_functions():
    assert h_max(PlanePoint(1.0, 2.0), 3) == pytest.approx(8 - 8)
    assert h_min(PlanePoint(2.0, 1.0), 3) == pytest.approx(1 - 1)


@pytest.mark.parametrize("p", [1.5, 3, 4])
def test_phi_between_h_and_u(p):
    rng = np.random.default_rng(1)
    x1 = rng.uniform(-2, 2, 500)
    x2 = rng.uniform(-2, 2, 500)
    hm = h_max(x1, p, x2=x2)
    ph = phi_max(x1, p, x2=x2)
    up = u_p(x1, p, x2=x2)
    assert np.all(hm <= ph + 1e-12)
    assert np.all(ph <= up + 1e-12)


def test_lambda_p_zero_at_three():
    a = np.linspace(0, 0.49, 100)
    assert np.max(np.abs(lambda_p(a, 3.0))) < 1e-14


@pytest.mark.parametrize("p", [1.5, 2.5, 4])
def test_lambda_p_small_alpha_matches_taylor(p):
    a = 1e-2
    assert lambda_p(a, p) == pytest.approx(lambda_p_taylor(a, p), rel=1e-2)


def test_lambda_p_domain():
    with pytest.raises(DomainError):
        lambda_p(0.5, 3)
    with pytest.raises(DomainError):
        lambda_p(-0.1, 3)


@pytest.mark.parametrize("p", [1.5, 2.5, 3.5, 4])
def test_lambda_sign_law(p):
    a = np.linspace(1e-3, 0.05, 50)
    assert np.all(np.sign(lambda_p(a, p)) == np.sign((p - 2) * (p - 3)))


def test_branch_consistency_random():
    from bellman_mt.special_functions import g_p_branches

    rng = np.random.default_rng(12)
    for p, z in zip(rng.uniform(1.05, 10, 10**4), rng.uniform(0.01, 3, 10**4)):
        pr = exponent_params(p)
        a, b = f_p_branches(pr.q * z, z, pr)
        assert abs(a - b) <= 1e-10 * max(1.0, (pr.q * z) ** p)
        lo, hi = g_p_branches((p - 1) * z, z, pr)
        assert abs(lo - hi) <= 1e-10 * max(1.0, ((p - 1) * z) ** p)
