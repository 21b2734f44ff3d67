"""Extremal trajectories, rejected Monge-Ampere solutions and Hessian checks.

Coordinates: ``y1 = (x2 + x1)/2``, ``y2 = (x2 - x1)/2``, ``y3 = x3``.  In
the reduced domain ``y1 >= |y2|`` (i.e. ``x1, x2 >= 0``) the Bellman
functions are affine along chords.  Two families carry the true solutions:

* ``c3_2``: chords in the plane ``y1 = const`` ending on ``y2 = y1``; used
  where ``x2 > (p-1) x1``.
* ``c4_2``: chords in ``y1 = const`` ending on ``y2 = -y1``; used where
  ``x2 < (p'-1) x1``.

Which Bellman function they describe depends on the side of 2:
``c3_2`` is the max for ``p > 2`` and the min for ``p < 2``, and the other
way round for ``c4_2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bellman_solver import OmegaPoint, _monotone_root, bellman_array
from .errors import DomainError, NoRootError, SectorError, StepSizeError
from .special_functions import _as_params

CASES = ("c2_vertical", "c3_1", "c4_1", "c3_2", "c4_2")


@dataclass(frozen=True)
class XiPoint:
    y1: float
    y2: float
    y3: float

    def as_array(self):
        return np.array([self.y1, self.y2, self.y3], dtype=float)


@dataclass(frozen=True)
class TrajectoryChord:
    case_id: str
    omega: float
    u: float
    v: float
    w: float
    start: tuple
    end: tuple

    def point_at(self, t):
        """Point ``(1-t) start + t end`` in y-coordinates."""
        a = np.asarray(self.start, dtype=float)
        b = np.asarray(self.end, dtype=float)
        return (1 - t) * a + t * b


class HessianMinors(NamedTuple):
    D1: float
    D2: float
    M33: float


def to_xi(x: OmegaPoint) -> XiPoint:
    return XiPoint(0.5 * (x.x2 + x.x1), 0.5 * (x.x2 - x.x1), x.x3)


def to_omega(y: XiPoint) -> OmegaPoint:
    return OmegaPoint(y.y1 - y.y2, y.y1 + y.y2, y.y3)


def xi_to_x(y1, y2, y3):
    """Array version of :func:`to_omega`."""
    return y1 - y2, y1 + y2, y3


def case_family(case_id, p):
    """Which Bellman function a chord family describes at exponent ``p``."""
    if case_id == "c3_2":
        return "max" if p > 2 else "min"
    if case_id == "c4_2":
        return "min" if p > 2 else "max"
    raise DomainError(f"no Bellman family for case {case_id!r}")


def in_sector(y: XiPoint, p, case_id) -> bool:
    y1, y2 = y.y1, y.y2
    c = (2.0 / p - 1.0) * y1
    if case_id == "c3_2":
        return -c < y2 < y1
    if case_id == "c4_2":
        return -y1 < y2 < c
    if case_id == "c3_1":
        return 0 < y2 < y1
    if case_id == "c4_1":
        return -y1 < y2 < 0
    if case_id == "c2_vertical":
        return -y1 <= y2 <= y1
    raise DomainError(f"unknown case {case_id!r}")


def _check_reduced(y: XiPoint, p):
    if y.y1 < 0 or abs(y.y2) > y.y1 or y.y3 < 0 or abs(y.y1 - y.y2) ** p > y.y3 * (1 + 1e-12):
        raise DomainError("point lies outside the reduced domain y1 >= |y2|, |y1 - y2|^p <= y3")


def chord(y: XiPoint, params, case_id, which=None) -> TrajectoryChord:
    """Extremal chord through ``y``.

    For ``c3_2``/``c4_2`` the chord runs from the boundary point
    ``U = (y1, u, (y1-u)^p)`` through ``y`` to the symmetry plane
    ``y2 = +-y1`` at height ``w``.  For ``c2_vertical`` it is the vertical
    line through ``y``; ``which`` picks max or min (default: whichever has its
    linear sector at ``y``).
    """
    params = _as_params(params)
    p = params.p
    _check_reduced(y, p)
    if case_id not in CASES:
        raise DomainError(f"unknown case {case_id!r}")
    if case_id in ("c3_1", "c4_1"):
        m = rejected_case_solution(y, params, case_id)
        om = (m / y.y3) ** (1.0 / p)
        v = (om + 1) / (om - 1) * y.y2
        start = (v, y.y2, abs(v - y.y2) ** p)
        w_end = _extend_to(start, y.as_array(), axis=0, target=abs(y.y2))
        return TrajectoryChord(case_id, om, math.nan, v, w_end[2], start, tuple(w_end))
    if not in_sector(y, p, case_id):
        raise SectorError(f"point {y} is outside the acceptable sector of {case_id}")
    x = to_omega(y)
    if case_id == "c2_vertical":
        if which is None:
            q = params.q
            if p >= 2:
                which = "max" if x.x2 <= q * x.x1 else "min"
            else:
                which = "max" if x.x2 >= q * x.x1 else "min"
        b = float(bellman_array(x.x1, x.x2, x.x3, params, which)[0])
        om = (b / y.y3) ** (1.0 / p) if y.y3 > 0 else math.inf
        start = (y.y1, y.y2, abs(y.y1 - y.y2) ** p)
        return TrajectoryChord(case_id, om, math.nan, math.nan, math.inf, start, (y.y1, y.y2, math.inf))
    which = case_family(case_id, p)
    b = float(bellman_array(x.x1, x.x2, x.x3, params, which)[0])
    om = (b / y.y3) ** (1.0 / p)
    u = (om - 1.0) / (om + 1.0) * y.y1
    start = (y.y1, u, (y.y1 - u) ** p)
    c = (2.0 / p - 1.0) * y.y1
    if case_id == "c3_2":
        # the chord's (y2, y3) line passes through (-c, 0)
        w = y.y3 * (y.y1 + c) / (y.y2 + c)
        end = (y.y1, y.y1, w)
    else:
        w = y.y3 * (-y.y1 - c) / (y.y2 - c)
        end = (y.y1, -y.y1, w)
    return TrajectoryChord(case_id, om, u, math.nan, w, start, end)


def _extend_to(a, b, axis, target):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = (target - a[axis]) / (b[axis] - a[axis])
    return a + t * (b - a)


def chord_residual(y: XiPoint, ch: TrajectoryChord, params) -> float:
    """Residual of the trajectory equation linking ``y`` and its boundary end."""
    params = _as_params(params)
    p = params.p
    c = (2.0 / p - 1.0) * y.y1
    u = ch.u
    if ch.case_id == "c3_2":
        lhs = (y.y2 + c) / y.y3
        rhs = (u + c) / (y.y1 - u) ** p
    elif ch.case_id == "c4_2":
        lhs = (y.y2 - c) / y.y3
        rhs = (u - c) / (y.y1 - u) ** p
    else:
        raise DomainError("residual defined for c3_2 and c4_2 only")
    return abs(lhs - rhs) / max(abs(lhs), 1.0)


def _rejected_rhs(y1, y2, p, case_id):
    x1, x2 = y1 - y2, y1 + y2
    if case_id == "c3_1":
        return (x2 - x1) ** (p - 1) * (x2 + (p - 1) * x1)
    return (x1 - x2) ** (p - 1) * (x1 + (p - 1) * x2)


def rejected_candidate_array(y1, y2, y3, params, case_id):
    """Candidate ``M(y)`` of case 3_1 or 4_1 at arrays of points.

    3_1 (``y2 > 0``): ``(w-1)^(p-1) (w+p-1) y3 = (x2-x1)^(p-1) (x2+(p-1)x1)``, ``w > 1``.
    4_1 (``y2 < 0``): ``(1-w)^(p-1) (1+(p-1)w) y3 = (x1-x2)^(p-1) (x1+(p-1)x2)``, ``0 < w < 1``.
    """
    params = _as_params(params)
    p = params.p
    y1, y2, y3 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (y1, y2, y3))
    rhs = _rejected_rhs(y1, y2, p, case_id) / y3
    if case_id == "c3_1":

        def phi(w):
            return (w - 1) ** (p - 1) * (w + p - 1) - rhs

        def dphi(w):
            return p * (w - 1) ** (p - 2) * (w + p - 2)

        def mag(w):
            return np.abs(rhs) + (w - 1) ** (p - 1) * (w + p - 1)

        lo = np.ones_like(rhs)
        hi = 1 + np.maximum(rhs, 1.0) ** (1.0 / p) + 1.0
    elif case_id == "c4_1":
        if np.any(rhs > 1):
            raise NoRootError("case 4_1 equation has no root at this point", {"rhs_over_y3": float(np.max(rhs))})

        # the left side decreases from 1 to 0 on [0, 1]; negate it
        def phi(w):
            return rhs - (1 - w) ** (p - 1) * (1 + (p - 1) * w)

        def dphi(w):
            return p * (p - 1) * w * (1 - w) ** (p - 2)

        def mag(w):
            return np.abs(rhs) + 1.0

        lo = np.zeros_like(rhs)
        hi = np.ones_like(rhs)
    else:
        raise DomainError(f"case {case_id!r} is not a rejected case")
    w, _ = _monotone_root(phi, dphi, lo, hi, mag)
    return w**p * y3


def rejected_case_solution(y: XiPoint, params, case_id) -> float:
    params = _as_params(params)
    _check_reduced(y, params.p)
    if case_id not in ("c3_1", "c4_1"):
        raise DomainError(f"case {case_id!r} is not a rejected case")
    if not in_sector(y, params.p, case_id):
        raise SectorError(f"{case_id} needs {'y2 > 0' if case_id == 'c3_1' else 'y2 < 0'}")
    return float(rejected_candidate_array(y.y1, y.y2, y.y3, params, case_id)[0])


def phi_case(case_id, omega, params):
    """``(Phi, Phi', Phi'', (p-1) Phi' - omega Phi'')`` for the four chord cases."""
    params = _as_params(params)
    p = params.p
    w = float(omega)
    k = p * (p - 1)
    if case_id == "c3_1":
        if not w > 1:
            raise DomainError("case 3_1 needs omega > 1")
        phi = (w - 1) ** (p - 1) * (w + p - 1)
        d1 = p * (w - 1) ** (p - 2) * (w + p - 2)
        d2 = k * (w - 1) ** (p - 3) * (w + p - 3)
        rhs = -k * (p - 2) * (w - 1) ** (p - 3)
    elif case_id == "c4_1":
        if not 0 < w < 1:
            raise DomainError("case 4_1 needs 0 < omega < 1")
        phi = (1 - w) ** (p - 1) * (1 + (p - 1) * w)
        d1 = -k * w * (1 - w) ** (p - 2)
        d2 = -k * (1 - w) ** (p - 3) * (1 - (p - 1) * w)
        rhs = -k * (p - 2) * w * (1 - w) ** (p - 3)
    elif case_id == "c3_2":
        if not w > 0:
            raise DomainError("case 3_2 needs omega > 0")
        phi = (w + 1) ** (p - 1) * (w - p + 1)
        d1 = p * (w + 1) ** (p - 2) * (w - p + 2)
        d2 = k * (w + 1) ** (p - 3) * (w - p + 3)
        rhs = -k * (p - 2) * (w + 1) ** (p - 3)
    elif case_id == "c4_2":
        if not w > 0:
            raise DomainError("case 4_2 needs omega > 0")
        phi = (1 + w) ** (p - 1) * (1 - (p - 1) * w)
        d1 = -k * w * (w + 1) ** (p - 2)
        d2 = -k * (w + 1) ** (p - 3) * (1 + (p - 1) * w)
        rhs = -k * (p - 2) * w * (w + 1) ** (p - 3)
    else:
        raise DomainError(f"unknown case {case_id!r}")
    return phi, d1, d2, rhs


# --- finite-difference Hessians ---------------------------------------------

# (i, j) offsets in units of h for the stencil of M11, M22, M33, M13, M23
_STENCIL = [(0, 0, 0)]
for _ax in range(3):
    for _s in (1, -1):
        _o = [0, 0, 0]
        _o[_ax] = _s
        _STENCIL.append(tuple(_o))
for _ax in (0, 1):
    for _s1 in (1, -1):
        for _s3 in (1, -1):
            _o = [0, 0, 0]
            _o[_ax] = _s1
            _o[2] = _s3
            _STENCIL.append(tuple(_o))
_STENCIL = np.array(_STENCIL, dtype=float)


def _second_derivatives(func, y, h):
    pts = y[None, :] + h * _STENCIL
    vals = dict(zip(map(tuple, _STENCIL.astype(int)), func(pts[:, 0], pts[:, 1], pts[:, 2])))
    m0 = vals[(0, 0, 0)]

    def dii(ax):
        e = [0, 0, 0]
        e[ax] = 1
        f = tuple(e)
        b = tuple(-v for v in e)
        return (vals[f] - 2 * m0 + vals[b]) / h**2

    def di3(ax):
        def o(s1, s3):
            e = [0, 0, 0]
            e[ax] = s1
            e[2] = s3
            return vals[tuple(e)]

        return (o(1, 1) - o(1, -1) - o(-1, 1) + o(-1, -1)) / (4 * h**2)

    return np.array([dii(0), dii(1), dii(2), di3(0), di3(1)])


def hessian_entries(func, y, h, richardson=True):
    """``(M11, M22, M33, M13, M23)`` by central differences of ``func(y1, y2, y3)``."""
    y = np.asarray(y, dtype=float)
    d = _second_derivatives(func, y, h)
    if not richardson:
        return d
    d2 = _second_derivatives(func, y, h / 2)
    return (4 * d2 - d) / 3


def minors(entries):
    m11, m22, m33, m13, m23 = entries
    return HessianMinors(m11 * m33 - m13**2, m22 * m33 - m23**2, m33)


def default_step(y):
    return 1e-4 * (1.0 + float(np.linalg.norm(y)))


def distance_to_nonsmooth(x: OmegaPoint, params):
    """Rough Euclidean distance from ``x`` to the sets where B is not C^2."""
    params = _as_params(params)
    p, q = params.p, params.q
    a1, a2 = abs(x.x1), abs(x.x2)
    d = min(a1, a2)
    norm = math.hypot(1.0, q)
    d = min(d, abs(a2 - q * a1) / norm, abs(a1 - q * a2) / norm)
    gap = x.x3 - a1**p
    grad = math.hypot(1.0, p * a1 ** (p - 1))
    return min(d, gap / grad)


def bellman_field(params, which):
    params = _as_params(params)

    def func(y1, y2, y3):
        x1, x2, x3 = xi_to_x(y1, y2, y3)
        return bellman_array(x1, x2, x3, params, which)[0]

    return func


def rejected_field(params, case_id):
    params = _as_params(params)

    def func(y1, y2, y3):
        return rejected_candidate_array(y1, y2, y3, params, case_id)

    return func


def _stencil_in_domain(y, h, p):
    pts = y[None, :] + h * _STENCIL
    x1 = pts[:, 0] - pts[:, 1]
    return np.all(np.abs(x1) ** p < pts[:, 2])


def hessian_check(x: OmegaPoint, params, which="max", h=None, min_distance=10.0, richardson=True):
    """Finite-difference minors ``(D1, D2, M33)`` of ``M(y) = B(x(y))``.

    ``D1`` is the determinant of the ``(y1, y3)`` block and ``D2`` that of
    the ``(y2, y3)`` block.  Points within ``min_distance * h`` of a
    non-smooth set are rejected with :class:`StepSizeError`.
    """
    params = _as_params(params)
    y = to_xi(x).as_array()
    h = default_step(y) if h is None else h
    if distance_to_nonsmooth(x, params) < min_distance * h:
        raise StepSizeError("point is too close to a cone, axis plane or the boundary")
    if not _stencil_in_domain(y, h, params.p):
        raise StepSizeError("finite-difference stencil leaves the domain")
    entries = hessian_entries(bellman_field(params, which), y, h, richardson)
    return minors(entries)


def rejected_hessian_check(y: XiPoint, params, case_id, h=None, richardson=True):
    params = _as_params(params)
    arr = y.as_array()
    h = default_step(arr) if h is None else h
    if not _stencil_in_domain(arr, h, params.p) or abs(y.y2) < 10 * h or y.y1 - abs(y.y2) < 10 * h:
        raise StepSizeError("stencil too close to the edge of the case sector")
    entries = hessian_entries(rejected_field(params, case_id), arr, h, richardson)
    return minors(entries)


def degenerate_direction(entries, block="y2"):
    """Unit null-direction estimate of the (y_i, y3) block (eigenvector of least |eigenvalue|)."""
    m11, m22, m33, m13, m23 = entries
    if block == "y2":
        mat = np.array([[m22, m23], [m23, m33]])
    else:
        mat = np.array([[m11, m13], [m13, m33]])
    vals, vecs = np.linalg.eigh(mat)
    return vecs[:, int(np.argmin(np.abs(vals)))]
