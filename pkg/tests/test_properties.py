import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from bellman_mt.bellman_solver import OmegaPoint, bellman_array, bellman_max, bellman_min, equation_residual
from bellman_mt.dyadic_martingale import admissibility_check, random_step_function, random_transform, make_rng
from bellman_mt.special_functions import exponent_params, f_p, lambda_p, phi_max, u_p, h_max

exponents = st.floats(min_value=1.1, max_value=8.0).filter(lambda p: abs(p - 2) > 1e-6)
# magnitudes are kept above 1e-12 (or exactly 0) so that B itself does not underflow
_mag = st.floats(min_value=1e-12, max_value=3.0)
coords = st.one_of(st.just(0.0), _mag, _mag.map(lambda v: -v))
gaps = st.one_of(st.just(0.0), st.floats(min_value=1e-12, max_value=20.0))


@settings(max_examples=200, deadline=None)
@given(p=exponents, x1=coords, x2=coords, gap=gaps)
def test_solution_satisfies_equation(p, x1, x2, gap):
    x3 = abs(x1) ** p + gap
    for which in ("max", "min"):
        v = bellman_array(x1, x2, x3, p, which)[0]
        assert equation_residual(x1, x2, x3, v, p, which) <= 1e-11


@settings(max_examples=200, deadline=None)
@given(p=exponents, x1=coords, x2=coords, gap=gaps)
def test_ordering_and_floor(p, x1, x2, gap):
    x = OmegaPoint(x1, x2, abs(x1) ** p + gap)
    hi = bellman_max(x, p).value
    lo = bellman_min(x, p).value
    floor = abs(x2) ** p
    assert lo >= floor * (1 - 1e-12)
    assert hi >= lo * (1 - 1e-12)


@settings(max_examples=200, deadline=None)
@given(p=exponents, x1=coords, x2=coords, gap=gaps, d=st.floats(0.0, 5.0))
def test_monotone_in_x3(p, x1, x2, gap, d):
    x3 = abs(x1) ** p + gap
    for which in ("max", "min"):
        a = bellman_array(x1, x2, x3, p, which)[0]
        b = bellman_array(x1, x2, x3 + d, p, which)[0]
        assert b >= a * (1 - 1e-12)


@settings(max_examples=200, deadline=None)
@given(p=exponents, x1=coords, x2=coords)
def test_plane_function_sandwich(p, x1, x2):
    pr = exponent_params(p)
    scale = max(1.0, abs(x1) ** p, abs(x2) ** p) * pr.beta
    assert h_max(x1, pr, x2=x2) <= phi_max(x1, pr, x2=x2) + 1e-12 * scale
    assert phi_max(x1, pr, x2=x2) <= u_p(x1, pr, x2=x2) + 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(p=exponents, z1=st.floats(0, 5), z2=st.floats(0, 5), t=st.floats(0.1, 10))
def test_f_p_homogeneous(p, z1, z2, t):
    a = f_p(t * z1, t * z2, p)
    b = t**p * f_p(z1, z2, p)
    assert abs(a - b) <= 1e-11 * max(1.0, t**p) * max(1.0, z1, z2) ** p * exponent_params(p).beta


@settings(max_examples=100, deadline=None)
@given(p=exponents, alpha=st.floats(0.0, 0.49))
def test_lambda_sign(p, alpha):
    # the sign of lambda_p follows (p - 2)(p - 3) for small and moderate alpha
    val = lambda_p(alpha, p)
    if alpha > 0.05 and abs(p - 3) > 0.2 and abs(p - 2) > 0.2 and 1.2 < p < 4:
        assert np.sign(val) == np.sign((p - 2) * (p - 3))


@settings(max_examples=50, deadline=None)
@given(depth=st.integers(1, 9), seed=st.integers(0, 2**31 - 1))
def test_transforms_admissible(depth, seed):
    f = random_step_function(depth, make_rng(seed))
    assert admissibility_check(random_transform(f, seed + 1))[0]
