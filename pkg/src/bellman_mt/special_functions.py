"""Closed-form scalar functions of the martingale transform problem.

Every function accepts Python floats or numpy arrays and returns the same
kind.  Exponent arithmetic lives in :class:`ExponentParams`.

Convention for ``F_p``: the "power" branch ``z1**p - beta * z2**p`` and the
"product" branch ``k (z1 + z2)**(p-1) (z1 - q z2)`` meet on the cone
``z1 = q z2`` with ``q = p* - 1``.  For ``p >= 2`` the power branch holds
below the cone (``z1 <= q z2``); for ``p < 2`` it holds above it.  The
product constant ``k = p (1 - 1/p*)**(p-1)`` makes the function C^1 in both
cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class ExponentParams:
    p: float
    p_conj: float
    p_star: float
    beta: float

    @property
    def q(self) -> float:
        """Slope of the switching cone, ``p* - 1``."""
        return self.p_star - 1.0

    @property
    def k(self) -> float:
        """Coefficient of the product branch of ``F_p``."""
        return self.p * (1.0 - 1.0 / self.p_star) ** (self.p - 1.0)

    @property
    def power_below_cone(self) -> bool:
        return self.p >= 2.0


@dataclass(frozen=True)
class PlanePoint:
    x1: float
    x2: float


def exponent_params(p: float) -> ExponentParams:
    p = float(p)
    if not math.isfinite(p) or p <= 1.0:
        raise DomainError(f"exponent must be finite and > 1, got {p!r}")
    p_conj = p / (p - 1.0)
    p_star = max(p, p_conj)
    beta = (p_star - 1.0) ** p
    return ExponentParams(p=p, p_conj=p_conj, p_star=p_star, beta=beta)


def _as_params(params) -> ExponentParams:
    if isinstance(params, ExponentParams):
        return params
    return exponent_params(params)


def _unwrap(out, *inputs):
    if all(np.ndim(v) == 0 for v in inputs):
        return float(out)
    return out


def _check_quadrant(z1, z2):
    if np.any(z1 < 0) or np.any(z2 < 0):
        raise DomainError("arguments must lie in the closed quadrant z1, z2 >= 0")
    if not (np.all(np.isfinite(z1)) and np.all(np.isfinite(z2))):
        raise DomainError("arguments must be finite")


def _power_region(z1, z2, params: ExponentParams):
    if params.power_below_cone:
        return z1 <= params.q * z2
    return z1 >= params.q * z2


def f_p(z1, z2, params):
    params = _as_params(params)
    a = np.asarray(z1, dtype=float)
    b = np.asarray(z2, dtype=float)
    _check_quadrant(a, b)
    p, q = params.p, params.q
    power = a**p - params.beta * b**p
    product = params.k * (a + b) ** (p - 1.0) * (a - q * b)
    out = np.where(_power_region(a, b, params), power, product)
    return _unwrap(out, z1, z2)


def f_p_branches(z1, z2, params):
    """Both branch formulas of ``F_p`` evaluated everywhere (power, product)."""
    params = _as_params(params)
    a = np.asarray(z1, dtype=float)
    b = np.asarray(z2, dtype=float)
    _check_quadrant(a, b)
    p = params.p
    power = a**p - params.beta * b**p
    product = params.k * (a + b) ** (p - 1.0) * (a - params.q * b)
    return _unwrap(power, z1, z2), _unwrap(product, z1, z2)


def f_p_partials(z1, z2, params):
    """Partial derivatives ``(dF/dz1, dF/dz2)``; both vanish at the origin."""
    params = _as_params(params)
    a = np.asarray(z1, dtype=float)
    b = np.asarray(z2, dtype=float)
    _check_quadrant(a, b)
    p, q, ps = params.p, params.q, params.p_star
    d1_power = p * a ** (p - 1.0)
    d2_power = -params.beta * p * b ** (p - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (a + b) ** (p - 2.0)
        d1_product = params.k * s * (p * a - ((p - 1.0) * q - 1.0) * b)
        d2_product = -params.k * s * ((ps - p) * a + p * q * b)
    power = _power_region(a, b, params)
    d1 = np.where(power, d1_power, d1_product)
    d2 = np.where(power, d2_power, d2_product)
    return _unwrap(d1, z1, z2), _unwrap(d2, z1, z2)


def g_p(z1, z2, params):
    """Continuous (not C^1 unless p = 2) gluing with break at ``z1 = (p-1) z2``."""
    params = _as_params(params)
    a = np.asarray(z1, dtype=float)
    b = np.asarray(z2, dtype=float)
    _check_quadrant(a, b)
    p = params.p
    r = p - 1.0
    low = a**p - r**p * b**p
    high = (a + b) ** (p - 1.0) * (a - r * b)
    return _unwrap(np.where(a <= r * b, low, high), z1, z2)


def g_p_branches(z1, z2, params):
    params = _as_params(params)
    a = np.asarray(z1, dtype=float)
    b = np.asarray(z2, dtype=float)
    p = params.p
    r = p - 1.0
    low = a**p - r**p * b**p
    high = (a + b) ** (p - 1.0) * (a - r * b)
    return _unwrap(low, z1, z2), _unwrap(high, z1, z2)


def _coords(pt, x2):
    if x2 is None:
        return np.asarray(pt.x1, dtype=float), np.asarray(pt.x2, dtype=float), (pt.x1, pt.x2)
    return np.asarray(pt, dtype=float), np.asarray(x2, dtype=float), (pt, x2)


def u_p(pt, params, x2=None):
    """Burkholder's function ``p(1-1/p*)^(p-1) (|x1|+|x2|)^(p-1) (|x2| - (p*-1)|x1|)``.

    Accepts a :class:`PlanePoint`, or ``u_p(x1, params, x2=...)`` with arrays.
    """
    params = _as_params(params)
    a, b, raw = _coords(pt, x2)
    a, b = np.abs(a), np.abs(b)
    out = params.k * (a + b) ** (params.p - 1.0) * (b - params.q * a)
    return _unwrap(out, *raw)


def h_c(pt, c, params, x2=None):
    if c <= 0:
        raise DomainError(f"c must be positive, got {c!r}")
    params = _as_params(params)
    a, b, raw = _coords(pt, x2)
    out = np.abs(b) ** params.p - c * np.abs(a) ** params.p
    return _unwrap(out, *raw)


def h_max(pt, params, x2=None):
    params = _as_params(params)
    return h_c(pt, params.beta, params, x2=x2)


def h_min(pt, params, x2=None):
    params = _as_params(params)
    return h_c(pt, 1.0 / params.beta, params, x2=x2)


def lambda_p(alpha, params):
    """``(1/8)[(1+2a)^p+(1-2a)^p] + 3/4 - (1/2)[(1+a)^p+(1-a)^p]``, ``0 <= a < 1/2``."""
    params = _as_params(params)
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0) or np.any(a >= 0.5):
        raise DomainError("alpha must lie in [0, 1/2)")
    p = params.p
    out = 0.125 * ((1 + 2 * a) ** p + (1 - 2 * a) ** p) + 0.75 - 0.5 * ((1 + a) ** p + (1 - a) ** p)
    return _unwrap(out, alpha)


def lambda_p_taylor(alpha, params):
    params = _as_params(params)
    p = params.p
    return p * (p - 1) * (p - 2) * (p - 3) / 8.0 * np.asarray(alpha, dtype=float) ** 4


def phi_max(pt, params, x2=None):
    params = _as_params(params)
    a, b, raw = _coords(pt, x2)
    return _unwrap(np.asarray(f_p(np.abs(b), np.abs(a), params)), *raw)


def phi_min(pt, params, x2=None):
    params = _as_params(params)
    a, b, raw = _coords(pt, x2)
    out = -np.asarray(f_p(np.abs(a), np.abs(b), params)) / params.beta
    return _unwrap(out, *raw)
