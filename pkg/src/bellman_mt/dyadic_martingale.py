"""Dyadic step functions, Haar analysis and martingale-transform pairs.

A :class:`StepFunction` of depth ``n`` holds ``2**n`` values, one per dyadic
interval of length ``2**-n`` in ``[0, 1]``.  The Haar function of a dyadic
interval ``I`` is ``|I|**-0.5`` on its left half and ``-|I|**-0.5`` on its
right half, so the coefficient of ``f`` on ``I`` is
``(|I|**0.5 / 2) * (mean_left - mean_right)``.

The extremal sequence uses break points ``eps`` and ``1 - eps`` that are not
dyadic; it is stored as a :class:`SegmentPair`, a list of intervals with
constant values.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bellman_solver import OmegaPoint
from .errors import ConvergenceError, DomainError
from .special_functions import _as_params, lambda_p


def make_rng(seed):
    """Counter-based generator so a seed means the same stream everywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class StepFunction:
    depth: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size != 2**self.depth:
            raise DomainError(f"depth {self.depth} needs {2**self.depth} values, got {vals.size}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float)
        depth = int(round(math.log2(values.size)))
        return cls(depth, values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def power_mean(self, p) -> float:
        return float(np.mean(np.abs(self.values) ** p))

    def refine(self, depth):
        """Same function written on a finer dyadic grid."""
        if depth < self.depth:
            raise DomainError("cannot refine to a coarser depth")
        return StepFunction(depth, np.repeat(self.values, 2 ** (depth - self.depth)))


@dataclass(frozen=True)
class MartingalePair:
    f: StepFunction
    g: StepFunction

    def __post_init__(self):
        if self.f.depth != self.g.depth:
            raise DomainError("f and g must have the same depth")

    def point(self, p) -> OmegaPoint:
        return OmegaPoint(self.f.mean, self.g.mean, self.f.power_mean(p))

    def g_power_mean(self, p) -> float:
        return self.g.power_mean(p)


# --- Haar analysis -----------------------------------------------------------


def haar_levels(values):
    """Haar coefficients as a list of arrays, level ``k`` holding ``2**k`` entries."""
    v = np.asarray(values, dtype=float)
    n = int(round(math.log2(v.size)))
    out = []
    for k in range(n):
        blocks = v.reshape(2**k, 2 ** (n - k))
        half = blocks.shape[1] // 2
        m_left = blocks[:, :half].mean(axis=1)
        m_right = blocks[:, half:].mean(axis=1)
        out.append(2.0 ** (-k / 2) / 2 * (m_left - m_right))
    return out


def haar_synthesis(mean, levels):
    arr = np.array([float(mean)])
    for k, c in enumerate(levels):
        delta = np.asarray(c, dtype=float) * 2.0 ** (k / 2)
        arr = np.stack([arr + delta, arr - delta], axis=1).ravel()
    return arr


def haar_analysis(f: StepFunction):
    """Mean and coefficients keyed by ``(level, index)`` of the dyadic interval."""
    coeffs = {}
    for k, c in enumerate(haar_levels(f.values)):
        for j, v in enumerate(c):
            coeffs[(k, j)] = float(v)
    return f.mean, coeffs


# --- random pairs ------------------------------------------------------------


def random_step_function(depth, rng, mean=None):
    """I.i.d. uniform values on [-1, 1], shifted to ``mean`` when given."""
    vals = rng.uniform(-1.0, 1.0, size=2**depth)
    if mean is not None:
        vals = vals - vals.mean() + mean
    return StepFunction(depth, vals)


def transform_with_signs(f: StepFunction, signs, g_mean=None) -> MartingalePair:
    levels = haar_levels(f.values)
    signs = np.asarray(signs, dtype=float)
    out = []
    pos = 0
    for c in levels:
        out.append(c * signs[pos : pos + c.size])
        pos += c.size
    mean = f.mean if g_mean is None else float(g_mean)
    return MartingalePair(f, StepFunction(f.depth, haar_synthesis(mean, out)))


def random_transform(f: StepFunction, seed, g_mean=None) -> MartingalePair:
    """``g`` with Haar coefficients ``eps_I c_I(f)``, signs drawn breadth-first."""
    rng = make_rng(seed)
    signs = 2 * rng.integers(0, 2, size=2**f.depth - 1) - 1
    return transform_with_signs(f, signs, g_mean)


def admissibility_check(pair: MartingalePair, rel_tol=1e-12):
    if pair.f.depth != pair.g.depth:
        raise DomainError("depth mismatch")
    cf = haar_levels(pair.f.values)
    cg = haar_levels(pair.g.values)
    if not cf:
        return True, 0.0
    viol = max(float(np.max(np.abs(np.abs(a) - np.abs(b)))) for a, b in zip(cf, cg))
    scale = max(1.0, float(np.max(np.abs(pair.f.values))), float(np.max(np.abs(pair.g.values))))
    return viol <= rel_tol * scale, viol


@dataclass(frozen=True)
class SimulationRecord:
    seed: int
    depth: int
    point: OmegaPoint
    g_power_mean: float


def simulate_pairs(params, n_pairs, depths=(4, 12), seed=0, x1_range=(-1.0, 1.0), x2_range=(-1.0, 1.0)):
    """Seeded batch of random pairs; pair ``i`` uses the seed ``seed + i``.

    The depth, the mean of ``f`` and the mean of ``g`` are drawn from the same
    per-pair stream ahead of the function values and the signs.
    """
    params = _as_params(params)
    lo, hi = depths
    out = []
    for i in range(n_pairs):
        s = seed + i
        rng = make_rng(s)
        depth = int(rng.integers(lo, hi + 1))
        m1 = rng.uniform(*x1_range)
        m2 = rng.uniform(*x2_range)
        f = random_step_function(depth, rng, mean=m1)
        signs = 2 * rng.integers(0, 2, size=2**depth - 1) - 1
        pair = transform_with_signs(f, signs, g_mean=m2)
        out.append(SimulationRecord(s, depth, pair.point(params.p), pair.g_power_mean(params.p)))
    return out


# --- proposition pairs -------------------------------------------------------

# depth-3 values (eighths of [0, 1])
H_I = np.array([1, 1, 1, 1, -1, -1, -1, -1], dtype=float)
PHI = np.array([1, 1, 1, -1, -1, -1, -1, 1], dtype=float)
PSI = PHI - H_I
# phi plus the normalized Haar function of [1/2, 1] scaled by 1/sqrt(2)
PSI_P3 = PHI + np.array([0, 0, 0, 0, 1, 1, -1, -1], dtype=float)


def _pair(f, g):
    return MartingalePair(StepFunction(3, f), StepFunction(3, g))


def proposition_pair(kind, x1, x2, a, params, sigma=1, sign=1):
    """Base chord pair and a competing pair at the same point.

    ``psi_standard``: ``(x1 + a phi, x2 + a psi)``; the ``g`` power mean moves
    by ``x2**p * lambda_p(a/x2)``.
    ``roles_swapped``: ``(x1 + b psi, x2 + b phi)`` with ``b`` chosen so the
    ``f`` power mean is unchanged.
    ``p3_variant``: ``(x1 + a phi, x2 + sign * a * psi3)``; for ``p = 3`` the
    cube mean moves by ``-sign * 3/4 * a**3``.
    """
    params = _as_params(params)
    p = params.p
    if not (x1 - a > 0 and x2 - a > 0 and a > 0):
        raise DomainError("need a > 0, x1 - a > 0 and x2 - a > 0")
    if sigma not in (1, -1) or sign not in (1, -1):
        raise DomainError("sigma and sign must be +1 or -1")
    base = _pair(x1 + a * H_I, x2 + sigma * a * H_I)
    if kind == "psi_standard":
        if 2 * a >= x2:
            raise DomainError("psi_standard needs a < x2 / 2")
        pert = _pair(x1 + a * PHI, x2 + a * PSI)
    elif kind == "roles_swapped":
        target = base.f.power_mean(p)

        def excess(t):
            return np.mean(np.abs(x1 + t * PSI) ** p) - target

        hi = a
        while excess(hi) < 0:
            hi *= 2
        b = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15)
        pert = _pair(x1 + b * PSI, x2 + b * PHI)
    elif kind == "p3_variant":
        pert = _pair(x1 + a * PHI, x2 + sign * a * PSI_P3)
    else:
        raise DomainError(f"unknown kind {kind!r}")
    return base, pert


def proposition_difference(kind, x1, x2, a, params, **kw):
    params = _as_params(params)
    base, pert = proposition_pair(kind, x1, x2, a, params, **kw)
    return pert.g_power_mean(params.p) - base.g_power_mean(params.p)


def lambda_identity_gap(x1, x2, a, params):
    """Simulated difference minus ``x2**p * lambda_p(a / x2)``."""
    params = _as_params(params)
    diff = proposition_difference("psi_standard", x1, x2, a, params)
    return diff - x2**params.p * lambda_p(a / x2, params)


# --- extremal sequence -------------------------------------------------------


@dataclass(frozen=True)
class SegmentPair:
    """Pair of step functions on a non-uniform partition of [0, 1]."""

    starts: np.ndarray
    lengths: np.ndarray
    f: np.ndarray
    g: np.ndarray

    def mean(self, which="f"):
        v = self.f if which == "f" else self.g
        return float(np.sum(self.lengths * v))

    def power_mean(self, p, which="g"):
        v = self.f if which == "f" else self.g
        return float(np.sum(self.lengths * np.abs(v) ** p))

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["segment_start", "segment_length", "f_value", "g_value"])
            for row in zip(self.starts, self.lengths, self.f, self.g):
                w.writerow([f"{v:.12g}" for v in row])
        finally:
            if own:
                fh.close()


@dataclass(frozen=True)
class ExtremalSequenceParams:
    x2: float
    x3: float
    eps: float
    c: float
    d_minus: float
    d_plus: float
    gamma: float
    c0: float
    depth_cap: int


@dataclass(frozen=True)
class ExtremalResult:
    pair: SegmentPair
    predicted_limit: float
    achieved: float
    constants: ExtremalSequenceParams
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.pair, self.predicted_limit, self.achieved))


def solve_c0(x2, x3, p):
    """Root of ``c**p = (1 - p c / x2) x3`` on ``(0, x2 / p)``."""
    return brentq(lambda c: c**p - (1 - p * c / x2) * x3, 0.0, x2 / p, xtol=1e-300, rtol=1e-15)


def solve_c0_swapped(x1, x3, p):
    """Root of ``(x1 - c)**p = (1 - p c / x1) x3`` on ``(0, x1 / p)`` (the ``p < 2`` variant)."""
    return brentq(lambda c: (x1 - c) ** p - (1 - p * c / x1) * x3, 0.0, x1 / p, xtol=1e-300, rtol=1e-15)


def _constants(c, m, eps):
    gamma = 1 + 2 * eps * c / ((1 - eps) * m)
    d_minus = gamma * m - c
    d_plus = gamma * m - c * (1 + eps) / (1 - eps)
    return gamma, d_minus, d_plus


def _solve_c(m, x3, eps, p, swapped):
    """Finite-eps constant ``c``; ``m`` is the non-zero mean."""

    def ratio(c):
        gamma = 1 + 2 * eps * c / ((1 - eps) * m)
        return (1 - 2 * eps) * gamma**p

    # beyond c_max the recursion's p-th moments diverge
    c_max = ((1 - 2 * eps) ** (-1.0 / p) - 1) * (1 - eps) * m / (2 * eps)

    def h(c):
        gamma, dm, dp = _constants(c, m, eps)
        if swapped:
            return eps * (abs(dm) ** p + abs(dp) ** p) - (1 - ratio(c)) * x3
        return 2 * eps * c**p - (1 - ratio(c)) * x3

    lo, hi = 0.0, c_max
    if not (h(lo) < 0 < h(hi)):
        raise ConvergenceError("no sign change for the constant c", {"eps": eps, "h_lo": h(lo), "h_hi": h(hi)})
    return brentq(h, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def extremal_sequence(x2, x3, eps, params, depth_cap=10**6, tail=2.0**-40, swapped=None):
    """Truncated self-similar pair at ``(0, x2, x3)`` (``p > 2``).

    For ``p < 2`` the same construction runs at ``(x2, 0, x3)`` with the
    roles of ``f`` and ``g`` exchanged (``x2`` is then the mean of ``f``).
    The recursion is unrolled ``K`` times, where ``K`` is the smallest of
    ``depth_cap``, the level at which the remaining tail weight
    ``((1-2eps) gamma**p)**K`` drops below ``tail``, and the level at which
    interval lengths would leave the floating-point range.  The innermost
    interval carries the constant pair with the right means.
    """
    params = _as_params(params)
    p = params.p
    if swapped is None:
        swapped = p < 2
    if not (x2 > 0 and x3 > 0):
        raise DomainError("need x2 > 0 and x3 > 0")
    if swapped and x2**p > x3:
        raise DomainError("point (x2, 0, x3) is outside the domain")
    if not 0 < eps < 0.25:
        raise DomainError("eps must lie in (0, 1/4)")
    c = _solve_c(x2, x3, eps, p, swapped)
    gamma, dm, dp = _constants(c, x2, eps)
    if swapped:
        c0 = solve_c0_swapped(x2, x3, p)
        predicted = c0**p * x3 / (x2 - c0) ** p
    else:
        c0 = solve_c0(x2, x3, p)
        predicted = x3 * (x2 - c0) ** p / c0**p

    log_shrink = math.log1p(-2 * eps)
    log_w = log_shrink + p * math.log(gamma)
    k_tail = math.ceil(math.log(tail) / log_w) if log_w < 0 else depth_cap
    # keep lengths above ~1e-300 and gamma**(pK) below ~1e280
    k_safe = int(min(650.0 / -log_shrink, 640.0 / max(p * math.log(gamma), 1e-300)))
    K = int(max(1, min(depth_cap, k_tail, k_safe)))

    j = np.arange(K, dtype=float)
    shrink = np.exp(j * log_shrink)
    scale = np.exp(j * math.log(gamma))
    starts_left = (1 - shrink) / 2  # cumulative eps * sum of earlier lengths
    left_len = eps * shrink
    right_start = 1 - starts_left - left_len
    inner_len = math.exp(K * log_shrink)
    inner_start = float(starts_left[-1] + left_len[-1]) if K else 0.0
    if swapped:
        fl, fr, gl, gr = dm * scale, dp * scale, -c * scale, c * scale
        inner_f, inner_g = math.exp(K * math.log(gamma)) * x2, 0.0
    else:
        fl, fr, gl, gr = -c * scale, c * scale, dm * scale, dp * scale
        inner_f, inner_g = 0.0, math.exp(K * math.log(gamma)) * x2
    starts = np.concatenate([starts_left, [inner_start], right_start[::-1]])
    lengths = np.concatenate([left_len, [inner_len], left_len[::-1]])
    fv = np.concatenate([fl, [inner_f], fr[::-1]])
    gv = np.concatenate([gl, [inner_g], gr[::-1]])
    pair = SegmentPair(starts, lengths, fv, gv)

    # averages in the log domain: level-j weight is eps * W**j
    weights = eps * np.exp(j * log_w)
    wk = math.exp(K * log_w)
    if swapped:
        lead = 2 * c**p
        inner_term = 0.0
    else:
        lead = abs(dm) ** p + abs(dp) ** p
        inner_term = wk * x2**p
    achieved = float(np.sum(weights) * lead + inner_term)
    a_inf = eps * lead / (1 - math.exp(log_w))
    trunc_err = wk * (a_inf - (0.0 if swapped else x2**p))
    ok, viol = _splitting_admissible(fl, fr, gl, gr, inner_f, inner_g, eps, gamma)
    consts = ExtremalSequenceParams(x2, x3, eps, c, dm, dp, gamma, c0, int(depth_cap))
    diag = {
        "depth": K,
        "tail_weight": wk,
        "truncation_error": trunc_err,
        "infinite_average": a_inf,
        "admissible": ok,
        "max_violation": viol,
        "swapped": bool(swapped),
    }
    return ExtremalResult(pair, predicted, achieved, consts, diag)


def _splitting_admissible(fl, fr, gl, gr, inner_f, inner_g, eps, gamma, rel_tol=1e-9):
    """Check ``|dmean f| = |dmean g|`` at every split of the generated family.

    Level ``j`` splits ``I_j`` at ``1 - eps`` and then its left part at
    ``eps / (1 - eps)``; ``I_{j+1}`` is the middle piece.
    """
    K = fl.size
    mf = np.empty(K + 1)
    mg = np.empty(K + 1)
    mf[K], mg[K] = inner_f, inner_g
    for j in range(K - 1, -1, -1):
        mf[j] = eps * (fl[j] + fr[j]) + (1 - 2 * eps) * mf[j + 1]
        mg[j] = eps * (gl[j] + gr[j]) + (1 - 2 * eps) * mg[j + 1]
    left_f = (eps * fl + (1 - 2 * eps) * mf[1:]) / (1 - eps)
    left_g = (eps * gl + (1 - 2 * eps) * mg[1:]) / (1 - eps)
    v1 = np.abs(np.abs(fr - left_f) - np.abs(gr - left_g))
    v2 = np.abs(np.abs(fl - mf[1:]) - np.abs(gl - mg[1:]))
    size = np.maximum.reduce([np.abs(fl), np.abs(fr), np.abs(gl), np.abs(gr), np.abs(mg[1:]), np.abs(mf[1:])])
    rel = np.maximum(v1, v2) / np.maximum(size, 1e-300)
    worst = float(np.max(rel)) if rel.size else 0.0
    return worst <= rel_tol, worst
