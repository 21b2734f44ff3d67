import math

import numpy as np
import pytest

from bellman_mt.bellman_solver import bellman_array
from bellman_mt.dyadic_martingale import (
    MartingalePair,
    StepFunction,
    admissibility_check,
    extremal_sequence,
    haar_analysis,
    haar_levels,
    haar_synthesis,
    lambda_identity_gap,
    make_rng,
    proposition_difference,
    proposition_pair,
    random_step_function,
    random_transform,
    simulate_pairs,
    solve_c0,
)
from bellman_mt.errors import DomainError
from bellman_mt.special_functions import exponent_params, lambda_p


def test_rng_is_reproducible():
    a = make_rng(11).uniform(size=5)
    b = make_rng(11).uniform(size=5)
    assert np.array_equal(a, b)


def test_haar_round_trip():
    f = random_step_function(6, make_rng(1))
    levels = haar_levels(f.values)
    assert [c.size for c in levels] == [2**k for k in range(6)]
    assert np.allclose(haar_synthesis(f.mean, levels), f.values, atol=1e-14)


def test_haar_single_level():
    # f = 1 on [0, 1/2), -1 on [1/2, 1): one coefficient, mean zero
    mean, coeffs = haar_analysis(StepFunction(1, [1.0, -1.0]))
    assert mean == 0.0
    assert coeffs == {(0, 0): 1.0}


def test_step_function_validation():
    with pytest.raises(DomainError):
        StepFunction(2, [1.0, 2.0])
    assert StepFunction(1, [1.0, 3.0]).refine(3).values.tolist() == [1, 1, 1, 1, 3, 3, 3, 3]


def test_random_transform_is_admissible():
    f = random_step_function(8, make_rng(2))
    pair = random_transform(f, seed=5, g_mean=0.3)
    ok, viol = admissibility_check(pair)
    assert ok and viol < 1e-13
    assert pair.g.mean == pytest.approx(0.3)
    bad = MartingalePair(f, StepFunction(8, make_rng(3).uniform(size=256)))
    assert not admissibility_check(bad)[0]


@pytest.mark.parametrize("p", [1.5, 3])
def test_simulated_pairs_between_bounds(p):
    recs = simulate_pairs(p, 200, depths=(4, 8), seed=9)
    pts = np.array([[r.point.x1, r.point.x2, r.point.x3] for r in recs]).T
    g = np.array([r.g_power_mean for r in recs])
    hi = bellman_array(*pts, p, "max", check=False)[0]
    lo = bellman_array(*pts, p, "min", check=False)[0]
    assert np.all(g <= hi * (1 + 1e-9) + 1e-12)
    assert np.all(g >= lo * (1 - 1e-9) - 1e-12)


def test_simulation_is_deterministic():
    a = simulate_pairs(3, 20, seed=4)
    b = simulate_pairs(3, 20, seed=4)
    assert [r.g_power_mean for r in a] == [r.g_power_mean for r in b]


@pytest.mark.parametrize("p", [1.5, 2.5, 3.5, 4])
@pytest.mark.parametrize("ratio", [0.01, 0.05, 0.1])
def test_lambda_identity(p, ratio):
    assert abs(lambda_identity_gap(1.5, 1.0, ratio, p)) <= 1e-12


def test_lambda_identity_scaled_point():
    pr = exponent_params(2.5)
    x2, a = 2.0, 0.1
    diff = proposition_difference("psi_standard", 3.0, x2, a, pr)
    assert diff == pytest.approx(x2**2.5 * lambda_p(a / x2, pr), rel=1e-10)


@pytest.mark.parametrize("sign", [1, -1])
def test_p3_variant(sign):
    a = 0.2
    diff = proposition_difference("p3_variant", 1.0, 1.0, a, 3, sign=sign)
    assert diff == pytest.approx(-sign * 0.75 * a**3, abs=1e-14)


def test_proposition_pairs_share_point():
    for kind in ("psi_standard", "roles_swapped", "p3_variant"):
        base, pert = proposition_pair(kind, 1.0, 1.2, 0.1, 3)
        assert base.point(3).x1 == pytest.approx(pert.point(3).x1)
        assert base.point(3).x2 == pytest.approx(pert.point(3).x2)
        assert base.point(3).x3 == pytest.approx(pert.point(3).x3, rel=1e-12)
        assert admissibility_check(pert, rel_tol=1e-12)[0]


def test_solve_c0():
    c = solve_c0(1.0, 1.0, 3)
    assert c**3 == pytest.approx(1 - 3 * c)


def test_extremal_limit_and_admissibility():
    res = extremal_sequence(1.0, 1.0, 0.01, 3)
    b = float(bellman_array(0.0, 1.0, 1.0, 3, "max")[0])
    assert res.predicted_limit == pytest.approx(b, rel=1e-12)
    assert res.diagnostics["admissible"]
    assert res.achieved <= b * (1 + 1e-12)
    pair = res.pair
    assert pair.mean("f") == pytest.approx(0.0, abs=1e-9)
    assert pair.mean("g") == pytest.approx(1.0, rel=1e-9)
    assert pair.power_mean(3, "f") == pytest.approx(1.0, rel=1e-9)
    assert np.sum(pair.lengths) == pytest.approx(1.0)


def test_extremal_swapped_variant():
    res = extremal_sequence(1.0, 2.0, 0.003, 1.5)
    b = float(bellman_array(1.0, 0.0, 2.0, 1.5, "max")[0])
    assert res.diagnostics["swapped"]
    assert res.predicted_limit == pytest.approx(b, rel=1e-9)
    assert abs(res.achieved - b) / b < 1e-3


def test_extremal_rejects_bad_eps():
    with pytest.raises(DomainError):
        extremal_sequence(1.0, 1.0, 0.3, 3)
    assert math.isfinite(extremal_sequence(1.0, 1.0, 0.1, 3).achieved)
