import numpy as np
import pytest

from bellman_mt.bellman_solver import OmegaPoint, bellman_array
from bellman_mt.errors import DomainError, NoRootError, SectorError, StepSizeError
from bellman_mt.special_functions import exponent_params
from bellman_mt.trajectories import (
    XiPoint,
    case_family,
    chord,
    chord_residual,
    hessian_check,
    in_sector,
    phi_case,
    rejected_candidate_array,
    rejected_case_solution,
    rejected_hessian_check,
    to_omega,
    to_xi,
    xi_to_x,
)


def test_coordinate_round_trip():
    x = OmegaPoint(0.3, -1.2, 2.0)
    back = to_omega(to_xi(x))
    assert (back.x1, back.x2, back.x3) == pytest.approx((0.3, -1.2, 2.0))
    assert xi_to_x(1.0, 0.25, 3.0) == (0.75, 1.25, 3.0)


def test_case_family():
    assert case_family("c3_2", 3) == "max"
    assert case_family("c3_2", 1.5) == "min"
    assert case_family("c4_2", 3) == "min"
    assert case_family("c4_2", 1.5) == "max"
    with pytest.raises(DomainError):
        case_family("c3_1", 3)


@pytest.mark.parametrize(
    "p, x, case",
    [
        (3, (0.2, 1.0, 1.0), "c3_2"),
        (4, (0.1, 0.9, 0.5), "c3_2"),
        (1.5, (1.0, 0.2, 2.0), "c4_2"),
        (1.25, (1.0, 0.05, 1.5), "c4_2"),
    ],
)
def test_chord_is_affine_and_consistent(p, x, case):
    pr = exponent_params(p)
    y = to_xi(OmegaPoint(*x))
    assert in_sector(y, p, case)
    ch = chord(y, pr, case)
    assert chord_residual(y, ch, pr) < 1e-12
    # the boundary end is on x3 = |x1|^p and carries |x2|^p
    s = np.asarray(ch.start)
    assert s[2] == pytest.approx(abs(s[0] - s[1]) ** p, rel=1e-12)
    ts = np.linspace(0.0, 1.0, 9)
    pts = np.array([ch.point_at(t) for t in ts])
    x1, x2, x3 = xi_to_x(pts[:, 0], pts[:, 1], pts[:, 2])
    vals = bellman_array(x1, x2, x3, pr, case_family(case, p))[0]
    fit = np.polyval(np.polyfit(ts, vals, 1), ts)
    assert np.max(np.abs(vals - fit)) <= 1e-10 * max(1.0, np.max(np.abs(vals)))


def test_chord_outside_sector():
    pr = exponent_params(3)
    with pytest.raises(SectorError):
        chord(to_xi(OmegaPoint(1.0, 0.5, 2.0)), pr, "c3_2")


def test_rejected_cases_solve_their_equations():
    pr = exponent_params(3)
    y = XiPoint(0.6, 0.2, 1.0)
    m = rejected_case_solution(y, pr, "c3_1")
    w = (m / y.y3) ** (1 / 3)
    x1, x2 = y.y1 - y.y2, y.y1 + y.y2
    assert (w - 1) ** 2 * (w + 2) * y.y3 == pytest.approx((x2 - x1) ** 2 * (x2 + 2 * x1), rel=1e-12)
    y = XiPoint(0.6, -0.2, 1.0)
    m = rejected_case_solution(y, pr, "c4_1")
    w = (m / y.y3) ** (1 / 3)
    x1, x2 = y.y1 - y.y2, y.y1 + y.y2
    assert (1 - w) ** 2 * (1 + 2 * w) * y.y3 == pytest.approx((x1 - x2) ** 2 * (x1 + 2 * x2), rel=1e-12)


def test_rejected_case_4_1_without_root():
    with pytest.raises(NoRootError):
        rejected_candidate_array(1.0, -0.5, 1.0, 3, "c4_1")


@pytest.mark.parametrize("case", ["c3_1", "c4_1", "c3_2", "c4_2"])
def test_phi_case_derivatives(case):
    pr = exponent_params(3.5)
    w = 1.7 if case in ("c3_1", "c3_2", "c4_2") else 0.4
    phi, d1, d2, rhs = phi_case(case, w, pr)
    h = 1e-5
    fp = phi_case(case, w + h, pr)[0]
    fm = phi_case(case, w - h, pr)[0]
    assert d1 == pytest.approx((fp - fm) / (2 * h), rel=1e-7)
    assert d2 == pytest.approx((fp - 2 * phi + fm) / h**2, rel=1e-4)
    assert rhs == pytest.approx((pr.p - 1) * d1 - w * d2, rel=1e-10, abs=1e-12)


def test_hessian_structure_on_max_chords():
    # one block is degenerate, the other negative semidefinite
    for x in [(0.2, 1.0, 1.0), (0.15, 0.8, 0.5), (0.1, 1.2, 0.3)]:
        d1, d2, m33 = hessian_check(OmegaPoint(*x), 3, "max")
        assert m33 < 0
        assert d1 > 0
        assert abs(d2) <= 1e-5 * d1


def test_hessian_too_close_to_cone():
    with pytest.raises(StepSizeError):
        hessian_check(OmegaPoint(0.5, 1.0 + 1e-6, 1.0), 3, "max")


@pytest.mark.parametrize("case, y", [("c3_1", XiPoint(0.6, 0.2, 1.0)), ("c4_1", XiPoint(0.6, -0.2, 1.0))])
def test_rejected_cases_are_not_semidefinite(case, y):
    d1, d2, m33 = rejected_hessian_check(y, 3, case)
    assert d2 < -1e-3
