"""Command-line front end.

Results go to stdout (or ``--out``), diagnostics to stderr.  JSON output
carries ``"schema": "bellman-mt/1"`` and renders floats with 17 significant
digits; CSV output uses 12.  Exit codes: 0 success, 1 verification failure,
2 invalid input.
"""
from __future__ import annotations

import argparse
import io
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .bellman_solver import (
    OmegaPoint,
    bellman_array,
    bellman_max,
    bellman_min,
    equation_residual,
    random_zigzag_pairs,
    sharp_constant_scan,
    zigzag_slack,
)
from .dyadic_martingale import extremal_sequence, lambda_identity_gap, make_rng, simulate_pairs
from .errors import ClassificationAmbiguityError, ConvergenceError, DomainError
from .majorant_oracle import critical_constant, greatest_zigzag_minorant, h_sampler_for, least_zigzag_majorant
from .special_functions import exponent_params, f_p_partials, lambda_p, phi_max, phi_min
from .trajectories import CASES, XiPoint, chord, hessian_check, to_omega

SCHEMA = "bellman-mt/1"
COMMANDS = ("eval", "scan", "verify", "simulate", "extremal", "envelope", "critical-c", "chords")
SUITES = ("special-functions", "solver-residual", "zigzag", "simulation", "envelope", "hessian")

CSV_HEADERS = {
    "simulate": "seed,depth,x1,x2,x3,g_power_mean,b_min,b_max",
    "extremal": "segment_start,segment_length,f_value,g_value",
    "envelope": "x1,x2,value",
    "chords": "t,y1,y2,y3,value",
    "verify": "suite,passed,statistic,tolerance,detail",
}


@dataclass
class RunConfig:
    command: str
    p: float = 3.0
    point: tuple | None = None
    grid_n: int | None = None
    box_l: float = 4.0
    depth: int = 10**6
    seed: int = 0
    eps: float = 1e-3
    tol: float | None = None
    format: str = "json"
    out: str | None = None
    which: str = "max"
    suite: str = "all"
    n_pairs: int = 1000
    case: str | None = None
    boundary: str = "pin_closed_form"


# --- rendering ---------------------------------------------------------------


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return f"{v:.17g}" if math.isfinite(v) else "null"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_json_value(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {type(v).__name__}")


def render_json(obj):
    return _json_value({"schema": SCHEMA, **obj}) + "\n"


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def render_csv(header, rows):
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_csv_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text, cfg: RunConfig):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands ----------------------------------------------------------------


def _require_point(cfg, n=3):
    if cfg.point is None or len(cfg.point) != n:
        raise DomainError(f"--point needs {n} comma-separated numbers")
    return cfg.point


def cmd_eval(cfg: RunConfig):
    x = OmegaPoint(*_require_point(cfg))
    params = exponent_params(cfg.p)
    sol = bellman_max(x, params) if cfg.which == "max" else bellman_min(x, params)
    _emit(
        render_json(
            {
                "command": "eval",
                "p": cfg.p,
                "which": cfg.which,
                "point": list(x.as_tuple()),
                "value": sol.value,
                "omega": sol.omega,
                "sector": sol.sector,
                "iterations": sol.iterations,
                "residual": sol.residual,
            }
        ),
        cfg,
    )
    return 0


def cmd_scan(cfg: RunConfig):
    params = exponent_params(cfg.p)
    n = cfg.grid_n or 200
    val = sharp_constant_scan(params, cfg.which, grid_n=n)
    target = params.beta if cfg.which == "max" else 1.0 / params.beta
    _emit(
        render_json(
            {"command": "scan", "p": cfg.p, "which": cfg.which, "grid_n": n, "value": val, "target": target,
             "relative_gap": abs(val - target) / target}
        ),
        cfg,
    )
    return 0


def cmd_simulate(cfg: RunConfig):
    params = exponent_params(cfg.p)
    depth = min(cfg.depth, 12)
    recs = simulate_pairs(params, cfg.n_pairs, depths=(min(4, depth), depth), seed=cfg.seed)
    pts = np.array([[r.point.x1, r.point.x2, r.point.x3] for r in recs]).T
    bmax = bellman_array(*pts, params, "max", check=False)[0]
    bmin = bellman_array(*pts, params, "min", check=False)[0]
    rows = [
        (r.seed, r.depth, r.point.x1, r.point.x2, r.point.x3, r.g_power_mean, lo, hi)
        for r, lo, hi in zip(recs, bmin, bmax)
    ]
    if cfg.format == "csv":
        _emit(render_csv(CSV_HEADERS["simulate"], rows), cfg)
    else:
        g = np.array([r.g_power_mean for r in recs])
        scale = np.maximum(1.0, np.abs(bmax))
        _emit(
            render_json(
                {"command": "simulate", "p": cfg.p, "n_pairs": cfg.n_pairs, "seed": cfg.seed,
                 "max_excess_over_b_max": float(np.max((g - bmax) / scale)),
                 "max_deficit_under_b_min": float(np.max((bmin - g) / scale))}
            ),
            cfg,
        )
    return 0


def cmd_extremal(cfg: RunConfig):
    params = exponent_params(cfg.p)
    x = _require_point(cfg)
    swapped = params.p < 2
    lead = x[0] if swapped else x[1]
    other = x[1] if swapped else x[0]
    if other != 0:
        raise DomainError("extremal sequence needs x1 = 0 (p > 2) or x2 = 0 (p < 2)")
    res = extremal_sequence(lead, x[2], cfg.eps, params, depth_cap=cfg.depth)
    if cfg.format == "csv":
        pair = res.pair
        _emit(render_csv(CSV_HEADERS["extremal"], zip(pair.starts, pair.lengths, pair.f, pair.g)), cfg)
        return 0
    b = float(bellman_array(x[0], x[1], x[2], params, "max")[0])
    _emit(
        render_json(
            {"command": "extremal", "p": cfg.p, "point": list(x), "eps": cfg.eps,
             "predicted_limit": res.predicted_limit, "achieved": res.achieved, "bellman_max": b,
             "c": res.constants.c, "c0": res.constants.c0, "gamma": res.constants.gamma,
             "diagnostics": res.diagnostics}
        ),
        cfg,
    )
    return 0


def cmd_envelope(cfg: RunConfig):
    params = exponent_params(cfg.p)
    n = cfg.grid_n or 129
    c = params.beta if cfg.which == "max" else 1.0 / params.beta
    op = least_zigzag_majorant if cfg.which == "max" else greatest_zigzag_minorant
    t0 = time.perf_counter()
    res = op(h_sampler_for(params, c), (cfg.box_l, n), boundary=cfg.boundary, params=params,
             tol=cfg.tol if cfg.tol is not None else 1e-10)
    if cfg.format == "csv":
        buf = io.StringIO()
        res.field.write_csv(buf)
        _emit(buf.getvalue().replace("\r\n", "\n"), cfg)
        return 0
    X1, X2 = res.field.mesh()
    exact = phi_max(X1, params, x2=X2) if cfg.which == "max" else phi_min(X1, params, x2=X2)
    inner = np.hypot(X1, X2) <= cfg.box_l / 4
    scale = max(1.0, float(np.max(np.abs(exact[inner]))))
    err = float(np.max(np.abs(res.field.values - exact)[inner])) / scale
    _emit(
        render_json(
            {"command": "envelope", "p": cfg.p, "which": cfg.which, "boundary": cfg.boundary,
             **res.metadata(), "interior_error": err, "seconds": time.perf_counter() - t0}
        ),
        cfg,
    )
    return 0


def cmd_critical(cfg: RunConfig):
    params = exponent_params(cfg.p)
    tol_c = cfg.tol * params.beta if cfg.tol is not None else None
    c = critical_constant(params, tol_c=tol_c)
    _emit(render_json({"command": "critical-c", "p": cfg.p, "c": c, "beta": params.beta, "ratio": c / params.beta}), cfg)
    return 0


def cmd_chords(cfg: RunConfig):
    params = exponent_params(cfg.p)
    x = OmegaPoint(*_require_point(cfg))
    y = XiPoint(0.5 * (x.x2 + x.x1), 0.5 * (x.x2 - x.x1), x.x3)
    case = cfg.case or ("c3_2" if params.p > 2 else "c4_2")
    ch = chord(y, params, case)
    if cfg.format == "csv":
        n = cfg.grid_n or 33
        ts = np.linspace(0.0, 1.0, n)
        pts = np.array([ch.point_at(t) for t in ts])
        if not np.all(np.isfinite(pts)):
            raise DomainError("chord is unbounded; CSV sampling needs a finite chord")
        xs = [to_omega(XiPoint(*pt)) for pt in pts]
        which = cfg.which
        vals = bellman_array([v.x1 for v in xs], [v.x2 for v in xs], [v.x3 for v in xs], params, which, check=False)[0]
        _emit(render_csv(CSV_HEADERS["chords"], [(t, *pt, v) for t, pt, v in zip(ts, pts, vals)]), cfg)
        return 0
    _emit(
        render_json(
            {"command": "chords", "p": cfg.p, "case": ch.case_id, "omega": ch.omega, "u": ch.u, "v": ch.v,
             "w": ch.w, "start": list(ch.start), "end": list(ch.end)}
        ),
        cfg,
    )
    return 0


# --- verification suites -----------------------------------------------------


def suite_special_functions(params, rng):
    # each check is normalized by its own tolerance; the suite passes when all are <= 1
    p, q = params.p, params.q
    z2 = rng.uniform(0.1, 2.0, 200)
    z1 = q * z2
    power = z1**p - params.beta * z2**p
    product = params.k * (z1 + z2) ** (p - 1) * (z1 - q * z2)
    seam = float(np.max(np.abs(power - product) / np.maximum(1.0, np.abs(power))))
    d_lo = np.array(f_p_partials(z1 * (1 - 1e-9), z2, params))
    d_hi = np.array(f_p_partials(z1 * (1 + 1e-9), z2, params))
    dseam = float(np.max(np.abs(d_lo - d_hi) / np.maximum(1.0, np.abs(d_lo))))
    lam3 = float(np.max(np.abs(lambda_p(rng.uniform(0, 0.45, 100), 3.0))))
    ident = max(abs(lambda_identity_gap(1.5, 1.0, a, params)) for a in (0.01, 0.05, 0.1))
    stat = max(seam / 1e-10, dseam / 1e-6, lam3 / 1e-12, ident / 1e-12)
    return stat <= 1.0, stat, 1.0, "F_p seam value and slope, lambda_3 = 0, lambda identity"


def suite_solver_residual(params, rng, n=20000):
    p = params.p
    x1 = rng.uniform(-2, 2, n)
    x2 = rng.uniform(-2, 2, n)
    x3 = np.abs(x1) ** p * (1 + rng.exponential(1.0, n))
    worst = 0.0
    for which in ("max", "min"):
        val = bellman_array(x1, x2, x3, params, which)[0]
        worst = max(worst, float(np.max(equation_residual(x1, x2, x3, val, params, which))))
    return worst <= 1e-11, worst, 1e-11, f"{n} points, both functions"


def suite_zigzag(params, rng, n=20000):
    xm, xp = random_zigzag_pairs(rng, n, params.p)
    worst = 0.0
    for which in ("max", "min"):
        s, sc = zigzag_slack(xm, xp, params, which)
        worst = max(worst, float(np.max(-s / sc)))
    return worst <= 1e-9, worst, 1e-9, f"{n} pairs with |dx1| = |dx2|"


def suite_simulation(params, rng, n=500):
    seed = int(rng.integers(0, 2**31))
    recs = simulate_pairs(params, n, depths=(4, 10), seed=seed)
    pts = np.array([[r.point.x1, r.point.x2, r.point.x3] for r in recs]).T
    g = np.array([r.g_power_mean for r in recs])
    bmax = bellman_array(*pts, params, "max", check=False)[0]
    bmin = bellman_array(*pts, params, "min", check=False)[0]
    scale = np.maximum(1.0, np.abs(bmax))
    worst = float(max(np.max((g - bmax) / scale), np.max((bmin - g) / scale)))
    return worst <= 1e-9, worst, 1e-9, f"{n} random pairs between B_min and B_max"


def suite_envelope(params, rng, L=4.0, n=129):
    worst = 0.0
    for which in ("max", "min"):
        c = params.beta if which == "max" else 1.0 / params.beta
        op = least_zigzag_majorant if which == "max" else greatest_zigzag_minorant
        res = op(h_sampler_for(params, c), (L, n), boundary="pin_closed_form", params=params)
        X1, X2 = res.field.mesh()
        exact = phi_max(X1, params, x2=X2) if which == "max" else phi_min(X1, params, x2=X2)
        inner = np.hypot(X1, X2) <= 1.0
        scale = max(1.0, float(np.max(np.abs(exact[inner]))))
        worst = max(worst, float(np.max(np.abs(res.field.values - exact)[inner])) / scale)
    return worst <= 0.02, worst, 0.02, f"box L={L}, n={n}, pinned to closed form"


def suite_hessian(params, rng, n=40):
    # one (y_i, y3) minor vanishes along the chords, the other keeps the sign of
    # a semidefinite block; M33 has the sign of concavity (max) or convexity (min)
    worst, tried, total = 0.0, 0, 0
    for which, sgn in (("max", 1.0), ("min", -1.0)):
        done = 0
        while done < n and tried < 50 * n:
            tried += 1
            x1 = rng.uniform(0.1, 1.0)
            x2 = x1 * math.exp(rng.uniform(-3.0, 3.0))
            x = OmegaPoint(x1, x2, x1**params.p * (1 + rng.uniform(0.2, 3.0)))
            sol = bellman_max(x, params) if which == "max" else bellman_min(x, params)
            if sol.sector != "implicit_branch":
                continue
            try:
                d1, d2, m33 = hessian_check(x, params, which)
            except DomainError:
                continue
            # minors are compared with the larger one, M33 with the function value
            b = sol.value
            big = max(abs(d1), abs(d2), 1.0)
            small = min(abs(d1), abs(d2)) / big
            bad_sign = max(0.0, -max(d1, d2) / big, sgn * m33 / max(1.0, abs(b)))
            worst = max(worst, small, bad_sign)
            done += 1
            total += 1
    if total == 0 and abs(params.p - 2.0) >= 1e-9:
        return False, math.nan, 1e-3, "no implicit-branch points sampled"
    return worst <= 1e-3, worst, 1e-3, f"{total} implicit-branch points: degenerate minor, semidefinite signs"


SUITE_FUNCS = {
    "special-functions": suite_special_functions,
    "solver-residual": suite_solver_residual,
    "zigzag": suite_zigzag,
    "simulation": suite_simulation,
    "envelope": suite_envelope,
    "hessian": suite_hessian,
}


def run_suite(name, params, seed):
    rng = make_rng(seed)
    try:
        return SUITE_FUNCS[name](params, rng)
    except (ConvergenceError, DomainError) as exc:
        return False, math.nan, math.nan, f"error: {exc}"


def cmd_verify(cfg: RunConfig):
    params = exponent_params(cfg.p)
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    rows = []
    for name in names:
        ok, stat, tol, detail = run_suite(name, params, cfg.seed)
        rows.append((name, bool(ok), stat, tol, detail))
    if cfg.format == "csv":
        _emit(render_csv(CSV_HEADERS["verify"], rows), cfg)
    elif cfg.format == "json":
        suites = [{"suite": r[0], "passed": r[1], "statistic": r[2], "tolerance": r[3], "detail": r[4]} for r in rows]
        _emit(render_json({"command": "verify", "p": cfg.p, "seed": cfg.seed, "suites": suites}), cfg)
    else:
        lines = [f"{'suite':<18} {'result':<6} {'statistic':>12} {'tolerance':>10}  detail"]
        for name, ok, stat, tol, detail in rows:
            lines.append(f"{name:<18} {'pass' if ok else 'FAIL':<6} {stat:>12.3e} {tol:>10.1e}  {detail}")
        _emit("\n".join(lines) + "\n", cfg)
    return 0 if all(r[1] for r in rows) else 1


HANDLERS = {
    "eval": cmd_eval,
    "scan": cmd_scan,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "extremal": cmd_extremal,
    "envelope": cmd_envelope,
    "critical-c": cmd_critical,
    "chords": cmd_chords,
}


def run(cfg: RunConfig) -> int:
    """Dispatch ``cfg.command``; returns the process exit code."""
    try:
        return HANDLERS[cfg.command](cfg)
    except (DomainError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ClassificationAmbiguityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


# --- argument parsing --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: {message}\n")


def _point(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("point coordinates must be finite")
    return vals


EPILOG = "CSV headers:\n" + "\n".join(f"  {k}: {v}" for k, v in CSV_HEADERS.items()) + (
    "\n\nJSON output carries \"schema\": \"" + SCHEMA + "\" and 17 significant digits; CSV uses 12."
    "\nExit codes: 0 success, 1 verification failure, 2 invalid input."
)


def build_parser():
    ap = _Parser(prog="bellman-mt", description="Bellman functions of the martingale transform problem.",
                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--p", type=float, default=3.0, help="exponent p > 1 (default 3)")
    ap.add_argument("--point", type=_point, help="x1,x2,x3 (eval, extremal, chords)")
    ap.add_argument("--which", choices=("max", "min"), default="max")
    ap.add_argument("--grid-n", type=int, help="scan grid (200), envelope grid (129), chord samples (33)")
    ap.add_argument("--box-l", type=float, default=4.0, help="envelope box half-width (default 4)")
    ap.add_argument("--depth", type=int, default=10**6, help="extremal depth cap; simulate max depth (<= 12)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, default=1e-3, help="extremal splitting parameter")
    ap.add_argument("--tol", type=float, help="envelope sweep tolerance; critical-c width as a fraction of beta")
    ap.add_argument("--format", choices=("csv", "json", "table"), default=None,
                    help="output format (json; verify defaults to table)")
    ap.add_argument("--out", help="write the result here instead of stdout")
    ap.add_argument("--suite", choices=("all",) + SUITES, default="all")
    ap.add_argument("--n-pairs", type=int, default=1000)
    ap.add_argument("--case", choices=CASES)
    ap.add_argument("--boundary", choices=("pin_closed_form", "pin_u_p", "free"), default="pin_closed_form")
    return ap


def config_from_args(ns) -> RunConfig:
    if ns.p <= 1 or not math.isfinite(ns.p):
        raise DomainError("--p must be a finite number > 1")
    fmt = ns.format or ("table" if ns.command == "verify" else "json")
    if fmt == "table" and ns.command != "verify":
        raise DomainError("--format table is only available for verify")
    if ns.command in ("eval", "extremal", "chords") and ns.point is None:
        raise DomainError(f"{ns.command} needs --point")
    if ns.grid_n is not None and ns.grid_n < 2:
        raise DomainError("--grid-n must be at least 2")
    if ns.depth < 1 or ns.n_pairs < 1:
        raise DomainError("--depth and --n-pairs must be positive")
    if ns.command == "simulate" and ns.depth < 4 and ns.depth != 10**6:
        raise DomainError("simulate needs --depth >= 4")
    return RunConfig(
        command=ns.command, p=ns.p, point=ns.point, grid_n=ns.grid_n, box_l=ns.box_l, depth=ns.depth,
        seed=ns.seed, eps=ns.eps, tol=ns.tol, format=fmt, out=ns.out, which=ns.which, suite=ns.suite,
        n_pairs=ns.n_pairs, case=ns.case, boundary=ns.boundary,
    )


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
