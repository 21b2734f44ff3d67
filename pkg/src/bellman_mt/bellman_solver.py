"""Exact Bellman functions B_max and B_min of the martingale transform problem.

Both are defined implicitly through ``F_p``::

    B_max:  F_p(|x2|, |x1|) = F_p(B**(1/p), x3**(1/p))
    B_min:  F_p(|x1|, |x2|) = F_p(x3**(1/p), B**(1/p))

On the sectors where both sides fall in the power branch of ``F_p`` the
equation is linear in ``B`` and solved in closed form.  Elsewhere both sides
are product-branch values and the root is found on a normalized bracket by
bisection followed by safeguarded Newton.

The array functions (``bellman_max_array`` etc.) are the workhorses; the
scalar wrappers return :class:`BellmanSolution` records.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .special_functions import ExponentParams, _as_params, f_p

SECTORS = ("linear_branch", "implicit_branch", "boundary", "p_equal_2")
LINEAR, IMPLICIT, BOUNDARY, P_EQUAL_2 = range(4)

_MEMBERSHIP_TOL = 1e-12
_BISECT_WIDTH = 1e-8
_MAX_ITER = 200


@dataclass(frozen=True)
class OmegaPoint:
    x1: float
    x2: float
    x3: float

    def as_tuple(self):
        return (self.x1, self.x2, self.x3)


@dataclass(frozen=True)
class BellmanSolution:
    value: float
    omega: float
    sector: str
    iterations: int
    residual: float
    diagnostics: dict = field(default_factory=dict)


def in_omega(x1, x2, x3, p, tol=_MEMBERSHIP_TOL):
    """Membership in ``{x3 >= 0, |x1|^p <= x3}`` up to ``tol * max(1, x3)``."""
    x1 = np.asarray(x1, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    ok = np.isfinite(x1) & np.isfinite(np.asarray(x2, dtype=float)) & np.isfinite(x3)
    return ok & (x3 >= 0) & (np.abs(x1) ** p <= x3 + tol * np.maximum(1.0, x3))


def _check_omega(x1, x2, x3, p):
    if not np.all(in_omega(x1, x2, x3, p)):
        raise DomainError("point(s) outside the domain {x3 >= 0, |x1|^p <= x3}")


def _normalize(x1, x2, x3, p):
    a1 = np.abs(np.asarray(x1, dtype=float))
    a2 = np.abs(np.asarray(x2, dtype=float))
    x3 = np.asarray(x3, dtype=float)
    s = np.maximum(x3, 0.0) ** (1.0 / p)
    t = np.maximum(np.maximum(a1, a2), s)
    t = np.where(t > 0, t, 1.0)
    return a1 / t, a2 / t, s / t, t


def _monotone_root(phi, dphi, lo, hi, mag, tol_width=_BISECT_WIDTH, max_iter=_MAX_ITER):
    """Vectorized root of increasing ``phi`` on ``[lo, hi]``.

    Bisection down to ``tol_width`` and then Newton kept inside the bracket.
    ``mag(z)`` is the size of the terms whose difference is ``phi(z)``; once
    ``|phi|`` is at that rounding floor the iterate is accepted.
    Returns ``(root, iterations)``.
    """
    lo = lo.copy()
    hi = hi.copy()
    iters = np.zeros(lo.shape, dtype=np.int64)
    active = hi - lo > tol_width
    n = 0
    while np.any(active) and n < max_iter:
        mid = 0.5 * (lo + hi)
        val = phi(mid)
        up = val > 0
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)
        iters += active
        active = hi - lo > tol_width
        n += 1
    z = 0.5 * (lo + hi)
    active = np.ones(z.shape, dtype=bool)
    n = 0
    while np.any(active) and n < max_iter:
        val = phi(z)
        d = dphi(z)
        pos = val > 0
        hi = np.where(active & pos, np.minimum(hi, z), hi)
        lo = np.where(active & ~pos, np.maximum(lo, z), lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = val / d
        cand = z - step
        bad = ~np.isfinite(cand) | (cand < lo) | (cand > hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        moved = np.abs(cand - z)
        # a Newton step this small already lands within rounding of the root
        floor = np.abs(val) <= 8 * 2.2e-16 * mag(z)
        done = floor | (val == 0) | (moved <= 1e-14 * np.abs(z)) | (hi - lo <= 4.4e-16 * np.abs(z))
        z = np.where(active & ~(val == 0) & ~floor, cand, z)
        iters += active
        active = active & ~done
        n += 1
    if np.any(active):
        raise ConvergenceError(
            "root search did not converge",
            {
                "unconverged": int(np.count_nonzero(active)),
                "iterations": n,
                "first_index": int(np.flatnonzero(active)[0]),
                "bracket": (float(lo[active][0]), float(hi[active][0])),
                "z": float(z[active][0]),
            },
        )
    return z, iters


def _product_core(z, s, p, q):
    return (z + s) ** (p - 1.0) * (z - q * s)


def _solve_array(x1, x2, x3, params: ExponentParams, which: str, check=True):
    p, q, beta = params.p, params.q, params.beta
    x1, x2, x3 = np.broadcast_arrays(
        np.asarray(x1, dtype=float), np.asarray(x2, dtype=float), np.asarray(x3, dtype=float)
    )
    if check:
        _check_omega(x1, x2, x3, p)
    a1, a2, s, t = _normalize(x1, x2, x3, p)
    raw1, raw3 = np.abs(x1).ravel(), x3.ravel()
    shape = a1.shape
    a1, a2, s, t = a1.ravel(), a2.ravel(), s.ravel(), t.ravel()
    n = a1.size
    bn = np.empty(n)
    sector = np.full(n, IMPLICIT, dtype=np.int8)
    iters = np.zeros(n, dtype=np.int64)
    x3n = s**p

    if abs(p - 2.0) < 1e-9:
        bn = a2**2 + np.maximum(x3n - a1**2, 0.0)
        sector[:] = P_EQUAL_2
    else:
        # B grows like (x3 - |x1|^p)^(1/p) off the boundary, so only points
        # on it (or outside it by the membership tolerance) take the shortcut
        boundary = (raw3 <= raw1**p) | (x3n - a1**p <= 0)
        if which == "max":
            linear = (a2 <= q * a1) if p > 2 else (a2 >= q * a1)
            lin_val = a2**p + beta * (x3n - a1**p)
        else:
            linear = (a1 <= q * a2) if p > 2 else (a1 >= q * a2)
            lin_val = a2**p + (x3n - a1**p) / beta
        linear = linear & ~boundary
        implicit = ~(linear | boundary)
        bn[boundary] = a2[boundary] ** p
        sector[boundary] = BOUNDARY
        bn[linear] = lin_val[linear]
        sector[linear] = LINEAR
        if np.any(implicit):
            zi, it = _solve_implicit(a1[implicit], a2[implicit], s[implicit], params, which)
            bn[implicit] = zi**p
            iters[implicit] = it
        bn = np.maximum(bn, a2**p)

    res = _residual(a1, a2, s, bn, params, which)
    value = bn * t**p
    # closed-form sectors are re-evaluated on the raw inputs to avoid rescaling error
    r1, r2, r3 = raw1, np.abs(x2).ravel(), raw3
    slope = 1.0 if abs(p - 2.0) < 1e-9 else (beta if which == "max" else 1.0 / beta)
    closed = sector != IMPLICIT
    raw = np.where(sector == BOUNDARY, r2**p, r2**p + slope * np.maximum(r3 - r1**p, 0.0))
    value = np.where(closed, np.maximum(raw, r2**p), value)
    return value.reshape(shape), sector.reshape(shape), iters.reshape(shape), res.reshape(shape)


def _solve_implicit(a1, a2, s, params, which):
    p, q, beta = params.p, params.q, params.beta
    if which == "max":
        rhs = _product_core(a2, a1, p, q)

        def phi(z):
            return _product_core(z, s, p, q) - rhs

        def dphi(z):
            return (z + s) ** (p - 2.0) * (p * z + (1.0 - (p - 1.0) * q) * s)

        def mag(z):
            return np.abs(_product_core(z, s, p, q)) + np.abs(rhs) + (z + s) ** p

        if p > 2:
            lo = np.maximum(a2, q * s)
            hi = a2 + q * s
        else:
            lo = a2.copy()
            hi = q * s
    else:
        rhs = _product_core(a1, a2, p, q)

        # F(s, z) decreases in z, so negate to get an increasing function
        def phi(z):
            return rhs - _product_core(s, z, p, q)

        def dphi(z):
            return -((s + z) ** (p - 2.0)) * ((p - 1.0 - q) * s - p * q * z)

        def mag(z):
            return np.abs(_product_core(s, z, p, q)) + np.abs(rhs) + (z + s) ** p

        top = (a2**p + s**p / beta) ** (1.0 / p)
        if p > 2:
            lo = a2.copy()
            hi = np.minimum(s / q, top)
        else:
            lo = np.maximum(a2, s / q)
            hi = top
    lo, hi = _widen(phi, lo, hi)
    return _monotone_root(phi, dphi, lo, hi, mag)


def _widen(phi, lo, hi):
    """Make sure ``phi(lo) <= 0 <= phi(hi)``; the analytic bracket is normally enough."""
    hi = np.maximum(hi, lo)
    for _ in range(60):
        bad = phi(hi) < 0
        if not np.any(bad):
            break
        hi = np.where(bad, hi + (hi - lo) + 1e-12, hi)
    for _ in range(60):
        bad = phi(lo) > 0
        if not np.any(bad):
            break
        lo = np.where(bad, np.maximum(lo - (hi - lo) - 1e-12, 0.0), lo)
    return lo, hi


def _f_terms(z1, z2, params):
    """``F_p`` and the summed size of its terms, in extended precision."""
    ld = np.longdouble
    z1 = np.asarray(z1, dtype=ld)
    z2 = np.asarray(z2, dtype=ld)
    p, q, k, beta = ld(params.p), ld(params.q), ld(params.k), ld(params.beta)
    pw1, pw2 = z1**p, beta * z2**p
    pre = k * (z1 + z2) ** (p - 1)
    if params.power_below_cone:
        power = z1 <= q * z2
    else:
        power = z1 >= q * z2
    val = np.where(power, pw1 - pw2, pre * (z1 - q * z2))
    size = np.where(power, pw1 + pw2, pre * (z1 + q * z2))
    return val, size


def _residual(a1, a2, s, bn, params, which, scale="terms"):
    z = np.maximum(np.asarray(bn, dtype=np.longdouble), 0) ** (1 / np.longdouble(params.p))
    if which == "max":
        lhs, t1 = _f_terms(a2, a1, params)
        rhs, t2 = _f_terms(z, s, params)
    else:
        lhs, t1 = _f_terms(a1, a2, params)
        rhs, t2 = _f_terms(s, z, params)
    den = np.maximum(np.abs(lhs), 1)
    if scale == "terms":
        den = np.maximum(den, np.maximum(t1, t2))
    return np.asarray(np.abs(lhs - rhs) / den, dtype=float)


def equation_residual(x1, x2, x3, value, params, which="max", scale="terms"):
    """Residual of the defining equation at a candidate value, in normalized form.

    ``scale="terms"`` divides by the largest of 1, |LHS| and the summed term
    sizes of either side; ``scale="lhs"`` divides by ``max(|LHS|, 1)`` only.
    """
    params = _as_params(params)
    a1, a2, s, t = _normalize(x1, x2, x3, params.p)
    # divide the p-th roots first so tiny scales do not underflow
    bn = (np.maximum(np.asarray(value, dtype=float), 0.0) ** (1.0 / params.p) / t) ** params.p
    return _residual(a1, a2, s, bn, params, which, scale)


def bellman_max_array(x1, x2, x3, params, check=True):
    """Vectorized B_max; returns ``(value, sector_code, iterations, residual)``."""
    return _solve_array(x1, x2, x3, _as_params(params), "max", check)


def bellman_min_array(x1, x2, x3, params, check=True):
    return _solve_array(x1, x2, x3, _as_params(params), "min", check)


def bellman_array(x1, x2, x3, params, which="max", check=True):
    if which not in ("max", "min"):
        raise DomainError(f"which must be 'max' or 'min', got {which!r}")
    return _solve_array(x1, x2, x3, _as_params(params), which, check)


def _omega(value, x3, p):
    if x3 > 0:
        return (value / x3) ** (1.0 / p)
    return math.inf if value > 0 else math.nan


def _wrap(x: OmegaPoint, params, which):
    params = _as_params(params)
    v, sec, it, res = _solve_array(x.x1, x.x2, x.x3, params, which)
    v = float(v)
    return BellmanSolution(
        value=v,
        omega=_omega(v, float(x.x3), params.p),
        sector=SECTORS[int(sec)],
        iterations=int(it),
        residual=float(res),
    )


def bellman_max(x: OmegaPoint, params) -> BellmanSolution:
    return _wrap(x, params, "max")


def bellman_min(x: OmegaPoint, params) -> BellmanSolution:
    return _wrap(x, params, "min")


def bounds(x: OmegaPoint, params, which="max"):
    params = _as_params(params)
    _check_omega(x.x1, x.x2, x.x3, params.p)
    a2 = abs(x.x2)
    lo = a2**params.p
    if which == "max":
        hi = (a2 + params.q * x.x3 ** (1.0 / params.p)) ** params.p
    elif which == "min":
        hi = lo + x.x3 / params.beta
    else:
        raise DomainError(f"which must be 'max' or 'min', got {which!r}")
    return lo, hi


def b_from_phi(x: OmegaPoint, params, which="max") -> float:
    """Second route: invert the plane functions with a scalar bracketed solver.

    For ``max``: phi_max(x1, x2) = phi_max(x3**(1/p), B**(1/p)).
    For ``min``: phi_min(x1, x2) = phi_min(x3**(1/p), B**(1/p)).
    """
    params = _as_params(params)
    p = params.p
    _check_omega(x.x1, x.x2, x.x3, p)
    a1, a2, s, t = (float(v) for v in _normalize(x.x1, x.x2, x.x3, p))
    if x.x3 <= abs(x.x1) ** p or s**p - a1**p <= 0:
        return abs(x.x2) ** p
    if which == "max":
        # phi_max(u, v) = F(|v|, |u|)
        target = f_p(a2, a1, params)

        def g(z):
            return f_p(z, s, params) - target

        hi = a2 + params.q * s
    elif which == "min":
        # phi_min(u, v) = -F(|u|, |v|) / beta
        target = f_p(a1, a2, params)

        def g(z):
            return target - f_p(s, z, params)

        hi = (a2**p + s**p / params.beta) ** (1.0 / p)
    else:
        raise DomainError(f"which must be 'max' or 'min', got {which!r}")
    lo = a2
    if g(lo) >= 0:
        return abs(x.x2) ** p
    while g(hi) < 0:
        hi = 2 * hi + 1e-12
    z = brentq(g, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return z**p * t**p


def b_from_phi_array(x1, x2, x3, params, which="max", iters=200):
    """Vectorized :func:`b_from_phi` by plain bisection on ``z = B**(1/p)``.

    Independent of the solver's Newton stage; bisection stops once the
    bracket stops shrinking in floating point.
    """
    params = _as_params(params)
    p = params.p
    x1, x2, x3 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x3)))
    _check_omega(x1, x2, x3, p)
    a1, a2, s, t = _normalize(x1, x2, x3, p)
    if which == "max":
        target = f_p(a2, a1, params)

        def g(z):
            return f_p(z, s, params) - target

        hi = a2 + params.q * s
    elif which == "min":
        target = f_p(a1, a2, params)

        def g(z):
            return target - f_p(s, z, params)

        hi = (a2**p + s**p / params.beta) ** (1.0 / p)
    else:
        raise DomainError(f"which must be 'max' or 'min', got {which!r}")
    lo = a2.copy()
    hi = np.maximum(np.asarray(hi, dtype=float) * (1 + 1e-12), lo)
    done = (np.asarray(g(lo)) >= 0) | (x3 <= np.abs(x1) ** p)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = np.asarray(g(mid)) < 0
        lo = np.where(neg & ~done, mid, lo)
        hi = np.where(~neg & ~done, mid, hi)
        if np.all((hi - lo <= 2.2e-16 * hi) | done):
            break
    z = np.where(done, a2, 0.5 * (lo + hi))
    return z**p * t**p


def sharp_constant_scan(params, which="max", grid_n=200, region="proof"):
    """Sup of B_max/x3 over ``|x2| <= |x1|`` or inf of B_min/x3.

    By homogeneity one coordinate is fixed to 1.  For ``min`` the default
    ``region="proof"`` scans ``|x2| >= |x1|``; ``region="hypothesis"`` scans
    ``|x2| <= |x1|`` instead.
    """
    if grid_n < 16:
        raise DomainError("grid_n must be at least 16")
    params = _as_params(params)
    lin = np.linspace(0.0, 1.0, grid_n)
    x3 = np.logspace(0.0, 6.0, grid_n)
    if which == "max":
        X2, X3 = np.meshgrid(lin, x3, indexing="ij")
        X1 = np.ones_like(X2)
        val = bellman_max_array(X1, X2, X3, params)[0]
        return float(np.max(val / X3))
    if which == "min":
        if region == "proof":
            X1, X3 = np.meshgrid(lin, x3, indexing="ij")
            X2 = np.ones_like(X1)
        elif region == "hypothesis":
            X2, X3 = np.meshgrid(lin, x3, indexing="ij")
            X1 = np.ones_like(X2)
        else:
            raise DomainError(f"unknown region {region!r}")
        # the x1 = 1 slice needs x3 >= 1, which the ladder already guarantees
        val = bellman_min_array(X1, X2, X3, params)[0]
        return float(np.min(val / X3))
    raise DomainError(f"which must be 'max' or 'min', got {which!r}")


def random_zigzag_pairs(rng, n, p, spread=1.0):
    """Endpoints ``x-``, ``x+`` in the domain with ``|dx1| = |dx2|``.

    Returns two ``(3, n)`` arrays.  The midpoint lies in the domain by
    convexity.
    """
    lo = rng.uniform(-spread, spread, size=(2, n))
    d = rng.uniform(-spread, spread, size=n)
    sgn = rng.choice([-1.0, 1.0], size=n)
    hi = np.vstack([lo[0] + d, lo[1] + sgn * d])
    gap = rng.exponential(spread**p, size=(2, n))
    xm = np.vstack([lo, np.abs(lo[0]) ** p + gap[0]])
    xp = np.vstack([hi, np.abs(hi[0]) ** p + gap[1]])
    return xm, xp


def zigzag_slack(xm, xp, params, which="max", alpha=None):
    """Concavity slack (max) or convexity slack (min) at ``x = a x+ + (1-a) x-``.

    ``alpha`` defaults to 1/2.  Returns ``(slack, scale)``; non-negative slack
    means the inequality holds for that pair.
    """
    params = _as_params(params)
    xm = np.asarray(xm, dtype=float)
    xp = np.asarray(xp, dtype=float)
    a = 0.5 if alpha is None else np.asarray(alpha, dtype=float)
    mid = a * xp + (1 - a) * xm
    bm = bellman_array(*xm, params, which)[0]
    bp = bellman_array(*xp, params, which)[0]
    bc = bellman_array(*mid, params, which)[0]
    avg = a * bp + (1 - a) * bm
    slack = bc - avg if which == "max" else avg - bc
    scale = np.maximum(1.0, np.maximum(np.abs(bm), np.abs(bp)))
    return slack, scale
