import numpy as np
import pytest

from bellman_mt.errors import DomainError
from bellman_mt.majorant_oracle import (
    GridField,
    classify_constant,
    diagonal_concavify,
    greatest_zigzag_minorant,
    growth_profile,
    h_sampler_for,
    least_zigzag_majorant,
    u_c,
    zigzag_concavity_defect,
)
from bellman_mt.special_functions import PlanePoint, exponent_params, phi_max, phi_min, u_p


def test_grid_field_validation():
    with pytest.raises(DomainError):
        GridField(1.0, 64, np.zeros((64, 64)))
    f = GridField(1.0, 33, np.zeros((33, 33)))
    assert f.index_of(0.0) == 16
    with pytest.raises(DomainError):
        f.index_of(0.01)


def test_concavify_a_single_diagonal_line():
    # a spike at the centre of an otherwise zero field is hulled along the diagonal
    v = np.zeros((33, 33))
    v[16, 16] = 1.0
    out = diagonal_concavify(GridField(1.0, 33, v), "plus").values
    diag = np.array([out[i, i] for i in range(33)])
    assert np.allclose(diag, 1 - np.abs(np.arange(33) - 16) / 16)
    assert out[0, 5] == 0.0


def test_majorant_of_concave_field_is_itself():
    # -(x1 - x2)^2 - (x1 + x2)^2 is concave along both diagonals
    pr = exponent_params(2)
    res = least_zigzag_majorant(lambda a, b: -2 * (a**2 + b**2), (1.0, 33), boundary="free", params=pr)
    X1, X2 = res.field.mesh()
    assert np.allclose(res.field.values, -2 * (X1**2 + X2**2), atol=1e-12)


@pytest.mark.parametrize("p", [3.0, 1.5])
def test_envelopes_recover_closed_forms(p):
    pr = exponent_params(p)
    up = least_zigzag_majorant(h_sampler_for(pr, pr.beta), (4.0, 129), "pin_closed_form", params=pr)
    lo = greatest_zigzag_minorant(h_sampler_for(pr, 1 / pr.beta), (4.0, 129), "pin_closed_form", params=pr)
    X1, X2 = up.field.mesh()
    inner = np.hypot(X1, X2) <= 1.0
    for res, exact in ((up, phi_max(X1, pr, x2=X2)), (lo, phi_min(X1, pr, x2=X2))):
        scale = max(1.0, np.max(np.abs(exact[inner])))
        assert np.max(np.abs(res.field.values - exact)[inner]) / scale < 0.02
    assert zigzag_concavity_defect(up.field) <= 1e-9
    assert zigzag_concavity_defect(lo.field, upper=False) <= 1e-9


def test_majorant_dominates_h_and_stays_below_u_p():
    pr = exponent_params(3)
    res = least_zigzag_majorant(h_sampler_for(pr, pr.beta), (2.0, 65), "pin_u_p", params=pr)
    X1, X2 = res.field.mesh()
    h = h_sampler_for(pr, pr.beta)(X1, X2)
    assert np.all(res.field.values >= h - 1e-12)
    assert np.all(res.field.values <= u_p(X1, pr, x2=X2) + 1e-9)


def test_u_c_matches_u_p_at_beta():
    pr = exponent_params(3)
    x1, x2 = np.array([0.3, -1.0]), np.array([1.0, 0.2])
    assert np.allclose(u_c(x1, x2, pr, pr.beta), u_p(x1, pr, x2=x2))


def test_classify_constant():
    assert classify_constant([1.0, 1.0, 1.0], 1.0)[0] == "super"
    assert classify_constant([1.0, 1.1, 1.3], 1.0)[0] == "sub"
    assert classify_constant([1.0, 1.01, 1.02], 1.0)[0] == "ambiguous"


def test_growth_profile_separates_constants_at_two():
    # p = 2: the envelope of h_c stays bounded exactly for c >= 1
    pr = exponent_params(2)
    ladder = ((2.0, 65), (4.0, 129))
    grows = growth_profile(pr, 0.8, ladder)
    flat = growth_profile(pr, 1.2, ladder)
    assert grows[1] - grows[0] > 0.5
    assert flat[1] == pytest.approx(flat[0], abs=1e-9)


def test_box_ladder_validation():
    from bellman_mt.majorant_oracle import critical_constant

    with pytest.raises(DomainError):
        critical_constant(3, box_ladder=((4.0, 129),))
    with pytest.raises(DomainError):
        critical_constant(3, box_ladder=((4.0, 129), (6.0, 129)))


def test_sampler_accepting_plane_points():
    pr = exponent_params(3)

    def scalar_h(pt: PlanePoint):
        return abs(pt.x2) ** 3 - 8 * abs(pt.x1) ** 3

    res = least_zigzag_majorant(scalar_h, (1.0, 33), "pin_closed_form", params=pr)
    ref = least_zigzag_majorant(h_sampler_for(pr, 8.0), (1.0, 33), "pin_closed_form", params=pr)
    assert np.allclose(res.field.values, ref.field.values)


def test_domination_order():
    pr = exponent_params(3)
    small = least_zigzag_majorant(h_sampler_for(pr, 12.0), (2.0, 65), "free", params=pr)
    large = least_zigzag_majorant(h_sampler_for(pr, 8.0), (2.0, 65), "free", params=pr)
    assert np.all(small.field.values <= large.field.values + 1e-12)
