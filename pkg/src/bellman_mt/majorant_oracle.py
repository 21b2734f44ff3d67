"""Grid envelopes: least zigzag-concave majorants and greatest zigzag-convex minorants.

A function on the plane is zigzag concave when it is concave along every
line of slope +1 and -1.  On an ``n x n`` grid over ``[-L, L]**2`` such lines
through nodes are the grid diagonals, so the discrete least majorant is the
fixed point of alternately replacing each diagonal by its upper hull.  Every
diagonal starts and ends on the box boundary, so boundary nodes keep the
values they start with; the boundary mode decides what those are.

None of this uses the closed forms except for the optional pinning.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ClassificationAmbiguityError, ConvergenceError, DomainError
from .special_functions import PlanePoint, _as_params, h_c, phi_max, phi_min, u_p


@dataclass(frozen=True)
class GridField:
    box_half_width: float
    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 33 or self.n % 2 == 0:
            raise DomainError("n must be odd and at least 33")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n, self.n):
            raise DomainError(f"values must have shape ({self.n}, {self.n})")
        if not np.all(np.isfinite(vals)):
            raise DomainError("values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def axis(self):
        return np.linspace(-self.box_half_width, self.box_half_width, self.n)

    def mesh(self):
        """``(X1, X2)`` with ``values[i, j]`` sitting at ``(axis[i], axis[j])``."""
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    def index_of(self, x):
        """Grid index of coordinate ``x``; raises if ``x`` is not a node."""
        step = 2 * self.box_half_width / (self.n - 1)
        k = (x + self.box_half_width) / step
        ki = int(round(k))
        if abs(k - ki) > 1e-9 or not 0 <= ki < self.n:
            raise DomainError(f"coordinate {x} is not a grid node")
        return ki

    def at(self, pt: PlanePoint):
        return float(self.values[self.index_of(pt.x1), self.index_of(pt.x2)])

    def with_values(self, values):
        return GridField(self.box_half_width, self.n, values)

    def write_csv(self, path_or_file):
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "value"])
            X1, X2 = self.mesh()
            for a, b, v in zip(X1.ravel(), X2.ravel(), self.values.ravel()):
                w.writerow([f"{a:.12g}", f"{b:.12g}", f"{v:.12g}"])
        finally:
            if own:
                fh.close()


@dataclass(frozen=True)
class EnvelopeResult:
    field: GridField
    sweeps: int
    residual: float

    def metadata(self):
        return {"L": self.field.box_half_width, "n": self.field.n, "sweeps": self.sweeps, "residual": self.residual}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.metadata(), fh)


@numba.njit(cache=True)
def _hull_line(ys, out, buf):
    """Upper concave hull of equally spaced samples ``ys`` written into ``out``."""
    m = ys.size
    top = 0
    for k in range(m):
        while top >= 2:
            a = buf[top - 2]
            b = buf[top - 1]
            # drop b when it is on or below the chord from a to k
            if (ys[b] - ys[a]) * (k - a) <= (ys[k] - ys[a]) * (b - a):
                top -= 1
            else:
                break
        buf[top] = k
        top += 1
    for s in range(top - 1):
        a = buf[s]
        b = buf[s + 1]
        out[a] = ys[a]
        for t in range(a + 1, b):
            w = (t - a) / (b - a)
            out[t] = (1.0 - w) * ys[a] + w * ys[b]
    out[buf[top - 1]] = ys[buf[top - 1]]


@numba.njit(cache=True)
def _sweep(values, plus, upper):
    """One pass over all diagonals; returns the largest nodal change."""
    n = values.shape[0]
    ys = np.empty(n)
    out = np.empty(n)
    buf = np.empty(n, dtype=np.int64)
    change = 0.0
    for line in range(2 * n - 1):
        d = 0
        s = 0
        if plus:
            d = line - (n - 1)  # j - i
            i0 = max(0, -d)
            i1 = min(n - 1, n - 1 - d)
        else:
            s = line  # i + j
            i0 = max(0, s - n + 1)
            i1 = min(n - 1, s)
        m = i1 - i0 + 1
        if m < 3:
            continue
        for t in range(m):
            i = i0 + t
            j = i + d if plus else s - i
            v = values[i, j]
            ys[t] = v if upper else -v
        _hull_line(ys[:m], out[:m], buf[:m])
        for t in range(m):
            i = i0 + t
            j = i + d if plus else s - i
            nv = out[t] if upper else -out[t]
            diff = abs(nv - values[i, j])
            if diff > change:
                change = diff
            values[i, j] = nv
    return change


def diagonal_concavify(field: GridField, direction="plus", upper=True) -> GridField:
    """Replace each diagonal by its upper hull (``upper=False``: lower hull)."""
    if direction not in ("plus", "minus"):
        raise DomainError("direction must be 'plus' or 'minus'")
    vals = field.values.copy()
    _sweep(vals, direction == "plus", upper)
    return field.with_values(vals)


def _sampler_grid(sampler, L, n):
    ax = np.linspace(-L, L, n)
    X1, X2 = np.meshgrid(ax, ax, indexing="ij")
    try:
        vals = np.asarray(sampler(X1, X2), dtype=float)
        if vals.shape != X1.shape:
            raise TypeError
    except TypeError:
        vals = np.vectorize(lambda a, b: float(sampler(PlanePoint(a, b))))(X1, X2)
    return vals, X1, X2


def _boundary_values(mode, params, X1, X2, upper):
    if callable(mode):
        return np.asarray(mode(X1, X2), dtype=float)
    if mode == "free":
        return None
    if params is None:
        raise DomainError(f"boundary mode {mode!r} needs params")
    if mode == "pin_u_p":
        if upper:
            return u_p(X1, params, x2=X2)
        # mirror bound for the minorant: phi_min >= -u_p(x2, x1) / beta
        return -u_p(X2, params, x2=X1) / params.beta
    if mode == "pin_u_c":
        raise DomainError("boundary mode 'pin_u_c' needs a constant; use u_c_boundary(params, c)")
    if mode == "pin_closed_form":
        return phi_max(X1, params, x2=X2) if upper else phi_min(X1, params, x2=X2)
    raise DomainError(f"unknown boundary mode {mode!r}")


def _envelope(h_sampler, box, boundary, max_sweeps, tol, params, upper):
    L, n = box
    params = None if params is None else _as_params(params)
    vals, X1, X2 = _sampler_grid(h_sampler, float(L), int(n))
    bnd = _boundary_values(boundary, params, X1, X2, upper)
    if bnd is not None:
        edge = np.zeros(vals.shape, dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        vals[edge] = bnd[edge]
    scale = max(1.0, float(np.max(np.abs(vals))))
    thresh = tol * scale
    change = math.inf
    sweeps = 0
    while sweeps < max_sweeps:
        change = max(_sweep(vals, True, upper), _sweep(vals, False, upper))
        sweeps += 1
        if change < thresh:
            break
    else:
        raise ConvergenceError(
            f"envelope did not converge in {max_sweeps} sweeps", {"residual": change, "threshold": thresh}
        )
    return EnvelopeResult(GridField(float(L), int(n), vals), sweeps, change)


def least_zigzag_majorant(h_sampler, box, boundary="pin_u_p", max_sweeps=100000, tol=1e-10, params=None):
    """Least zigzag-concave majorant of ``h_sampler`` on the box ``(L, n)``.

    ``h_sampler(X1, X2)`` is called on the whole mesh; a sampler taking a
    single :class:`PlanePoint` also works.  ``boundary`` is ``"pin_u_p"``,
    ``"pin_closed_form"``, ``"free"`` (keep ``h`` on the boundary) or a
    callable giving the boundary values.
    """
    return _envelope(h_sampler, box, boundary, max_sweeps, tol, params, upper=True)


def greatest_zigzag_minorant(h_sampler, box, boundary="pin_u_p", max_sweeps=100000, tol=1e-10, params=None):
    return _envelope(h_sampler, box, boundary, max_sweeps, tol, params, upper=False)


def zigzag_concavity_defect(field: GridField, upper=True):
    """Largest violation of discrete concavity along the diagonals (0 when concave)."""
    v = field.values if upper else -field.values
    a = v[:-2, :-2] + v[2:, 2:] - 2 * v[1:-1, 1:-1]
    b = v[:-2, 2:] + v[2:, :-2] - 2 * v[1:-1, 1:-1]
    return float(max(np.max(a), np.max(b), 0.0))


def h_sampler_for(params, c):
    params = _as_params(params)

    def sampler(X1, X2):
        return h_c(X1, c, params, x2=X2)

    return sampler


def u_c(X1, X2, params, c):
    """Analog of ``u_p`` for ``h_c``: slope ``c**(1/p)`` in place of ``p* - 1``.

    Equals ``u_p`` at ``c = beta``.
    """
    params = _as_params(params)
    g = c ** (1.0 / params.p)
    k = params.p * (g / (g + 1.0)) ** (params.p - 1.0)
    a, b = np.abs(X1), np.abs(X2)
    return k * (a + b) ** (params.p - 1.0) * (b - g * a)


def u_c_boundary(params, c):
    params = _as_params(params)
    return lambda X1, X2: u_c(X1, X2, params, c)


def growth_profile(params, c, box_ladder, test_point=PlanePoint(0.5, 1.0), boundary="pin_u_c", tol=1e-10):
    """Envelope value of ``h_c`` at ``test_point`` for each box of the ladder."""
    params = _as_params(params)
    sampler = h_sampler_for(params, c)
    bmode = u_c_boundary(params, c) if boundary == "pin_u_c" else boundary
    out = []
    for L, n in box_ladder:
        res = least_zigzag_majorant(sampler, (L, n), boundary=bmode, tol=tol, params=params)
        out.append(res.field.at(test_point))
    return np.array(out)


def classify_constant(values, scale, threshold=0.01, dead_band=0.0025):
    """``"sub"`` if the value grows by more than ``threshold`` between boxes.

    Growth is measured relative to ``max(|v|, scale)``.  Returns ``"ambiguous"``
    when the largest relative growth lies within ``dead_band`` of the threshold.
    """
    vals = np.asarray(values, dtype=float)
    growth = np.diff(vals) / np.maximum(np.abs(vals[:-1]), scale)
    g = float(np.max(growth))
    if abs(g - threshold) <= dead_band:
        return "ambiguous", g
    return ("sub" if g > threshold else "super"), g


def critical_constant(
    params,
    box_ladder=((4.0, 129), (8.0, 257), (16.0, 513)),
    test_point=PlanePoint(0.5, 1.0),
    tol_c=None,
    bracket=None,
    boundary="pin_u_c",
    threshold=0.01,
    dead_band=0.0025,
    return_trace=False,
):
    """Bisection for the smallest ``c`` whose box envelopes of ``h_c`` stay bounded."""
    params = _as_params(params)
    ladder = [(float(L), int(n)) for L, n in box_ladder]
    if len(ladder) < 2:
        raise DomainError("box ladder needs at least two boxes")
    for (l0, _), (l1, _) in zip(ladder, ladder[1:]):
        if l1 < 2 * l0:
            raise DomainError("consecutive boxes must grow by a factor of at least 2")
    lo, hi = bracket if bracket is not None else (params.beta / 4, 2 * params.beta)
    tol_c = 0.01 * params.beta if tol_c is None else tol_c
    scale_pt = abs(test_point.x1) ** params.p + abs(test_point.x2) ** params.p
    trace = []

    def classify(c):
        vals = growth_profile(params, c, ladder, test_point, boundary)
        label, g = classify_constant(vals, scale_pt, threshold, dead_band)
        trace.append((c, label, g, vals.tolist()))
        return label

    if classify(hi) == "sub":
        raise ClassificationAmbiguityError(f"upper bracket {hi} classified subcritical")
    while hi - lo > tol_c:
        mid = 0.5 * (lo + hi)
        label = classify(mid)
        if label == "sub":
            lo = mid
        elif label == "super":
            hi = mid
        else:
            # dead band: accept mid only if a bracket of width tol_c around it is decisive
            a, b = max(lo, mid - 0.5 * tol_c), min(hi, mid + 0.5 * tol_c)
            if classify(a) == "sub" and classify(b) == "super":
                lo, hi = a, b
                break
            raise ClassificationAmbiguityError(f"growth at c = {mid} lies in the dead band")
    mid = 0.5 * (lo + hi)
    return (mid, trace) if return_trace else mid
