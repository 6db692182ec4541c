"""Fixed-point solution of the Euler-Lagrange system and symmetry classifiers.

The damped iteration

    f  <-  (1 - damping) * f + damping * [T((Pf)^(np/(n-1)-1))]^(1/(p-1)),

renormalized each step, drives f toward nonnegative critical points of the
extension inequality.  Renormalization fixes the scale-and-dilation gauge:
``unit_lp`` only rescales the amplitude (leaving a one-parameter dilation
drift), ``mass_half`` additionally dilates so that exactly half of the L^p
mass sits inside the unit ball -- the same gauge that restores compactness
in the existence theory.  No convergence theorem backs the iteration;
divergence is detected and reported with the trace.

The module also hosts the inversion-symmetry machinery: a scan for the
center that makes a planar field radial, the least-squares classifier for
profiles of the form (c1 r^2 + c2)^(alpha/2) versus pure powers c1 r^alpha,
and the one-dimensional third-difference test for [a(x-x0)^2+b]^(alpha/2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, SolverDivergence
from .extension import dual_extend, poisson_extend
from .extremals import _calibration_log_ratio
from .grids import (AxisymFn, HalfspaceGrid, PolarFn, RadialFn, RadialGrid,
                    default_halfspace_grid, dilate_boundary, lp_norm_boundary,
                    lp_norm_halfspace)
from .quadrature import panel_rule


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 150
    tol_residual: float = 5e-4
    damping: float = 0.5
    normalization: str = "mass_half"      # or "unit_lp"
    seed: int = 0

    def __post_init__(self):
        if self.tol_residual <= 0.0:
            raise DomainError("tol_residual must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise DomainError("damping must lie in (0, 1]")
        if self.normalization not in ("unit_lp", "mass_half"):
            raise DomainError(f"unknown normalization {self.normalization!r}")


@dataclass
class IterationTrace:
    residuals: list = field(default_factory=list)
    rayleighs: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    converged: bool = False
    message: str = ""

    def append(self, residual: float, rayleigh: float, lam: float) -> None:
        self.residuals.append(residual)
        self.rayleighs.append(rayleigh)
        self.lambdas.append(lam)

    def __len__(self) -> int:
        return len(self.residuals)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "residual", "rayleigh", "lambda"])
            for i, (res, ray, lam) in enumerate(
                    zip(self.residuals, self.rayleighs, self.lambdas)):
                writer.writerow([i, f"{res!r}", f"{ray!r}", f"{lam!r}"])


def concentration_radius(f: RadialFn, p: float, fraction: float = 0.5,
                         order: int = 8) -> float:
    """Radius R with mass(|f|^p within B_R) = fraction * total, by bisection.

    The mass profile is accumulated from per-cell Gauss panels of the sample
    interpolant, making partial masses consistent with the total used here.
    """
    grid = f.grid
    edges = np.concatenate(([0.0], grid.nodes))
    cell_mass = np.empty(grid.size)
    for i in range(grid.size):
        xs, ws = panel_rule(edges[i], edges[i + 1], order)
        cell_mass[i] = np.dot(ws, np.abs(f.eval(xs)) ** p * xs ** (grid.d - 1))
    cum = np.concatenate(([0.0], np.cumsum(cell_mass)))
    total = cum[-1]
    if total <= 0.0 or not math.isfinite(total):
        raise DomainError("mass profile is degenerate; cannot fix the gauge")
    target = fraction * total
    if cum[1] >= target:
        return float(grid.nodes[0] * (target / cum[1]) ** (1.0 / grid.d))

    def mass_at(R: float) -> float:
        i = int(np.searchsorted(edges, R, side="right")) - 1
        i = min(max(i, 0), grid.size - 1)
        xs, ws = panel_rule(edges[i], R, order)
        part = float(np.dot(ws, np.abs(f.eval(xs)) ** p * xs ** (grid.d - 1)))
        return cum[i] + part

    lo, hi = float(edges[1]), float(grid.r_max)
    if mass_at(hi) <= target:
        raise DomainError("half the mass lies beyond the mesh; grid too small")
    return float(brentq(lambda R: mass_at(R) - target, lo, hi, xtol=1e-12,
                        rtol=1e-12))


def normalize_mass_half(f: RadialFn, p: float):
    """Dilation factor lambda putting half the L^p mass of f in B_1.

    Returns (lambda, dilated function); the input is L^p-normalized first.
    """
    norm = lp_norm_boundary(f, p)
    if norm <= 0.0:
        raise DomainError("cannot normalize the zero function")
    fn = f.scaled(1.0 / norm)
    R_half = concentration_radius(fn, p, 0.5)
    lam = 1.0 / R_half
    return lam, dilate_boundary(fn, lam, p)


def _renormalize(f: RadialFn, p: float, mode: str):
    if mode == "unit_lp":
        norm = lp_norm_boundary(f, p)
        return f.scaled(1.0 / norm), 1.0
    lam, fn = normalize_mass_half(f, p)
    return fn, lam


def el_fixed_point(n: int, p: float, init: RadialFn, cfg: SolverConfig,
                   hs_grid: HalfspaceGrid | None = None):
    """Damped fixed-point iteration for the Euler-Lagrange system.

    Returns (solution, trace).  The solution is gauge-normalized; its
    amplitude solves the unit-coefficient system only after calibration by
    normalize_el.  Raises SolverDivergence (trace attached) when the residual
    grows tenfold over 50 iterations.
    """
    if np.any(init.values < 0.0) or not np.any(init.values > 0.0):
        raise DomainError("initial guess must be nonnegative and nonzero")
    if hs_grid is None:
        hs_grid = default_halfspace_grid(init.grid)
    q = n * p / (n - 1)
    trace = IterationTrace()
    f, lam = _renormalize(init, p, cfg.normalization)
    from .errors import DivergenceError
    for _ in range(cfg.max_iters):
        u = poisson_extend(f, hs_grid)
        power = AxisymFn(hs_grid, np.maximum(u.values, 0.0) ** (q - 1.0))
        rhs = dual_extend(power, f.grid).values
        lhs = f.values ** (p - 1.0)
        log_ratio, _ = _calibration_log_ratio(f, lhs, rhs)
        a = math.exp(log_ratio / (p - q))
        residual = float(np.max(np.abs(a ** (p - 1.0) * lhs
                                       - a ** (q - 1.0) * rhs))
                         / np.max(a ** (p - 1.0) * lhs))
        try:
            rayleigh = lp_norm_halfspace(u, q) / lp_norm_boundary(f, p)
        except DivergenceError as exc:
            trace.message = f"divergent iterate norm: {exc}"
            raise SolverDivergence(trace.message, trace=trace) from exc
        trace.append(residual, rayleigh, lam)
        if residual <= cfg.tol_residual:
            trace.converged = True
            trace.message = f"residual {residual:.3e} <= tol"
            return f, trace
        if len(trace) >= 50 and residual > 10.0 * trace.residuals[-50]:
            trace.message = "residual grew 10x over 50 iterations"
            raise SolverDivergence(trace.message, trace=trace)
        update = np.maximum(rhs, 0.0) ** (1.0 / (p - 1.0))
        mixed = (1.0 - cfg.damping) * f.values + cfg.damping * update
        f = RadialFn(f.grid, mixed, tail_exponent=f.tail_exponent,
                     nonnegative=True)
        f, lam = _renormalize(f, p, cfg.normalization)
    trace.message = f"no convergence in {cfg.max_iters} iterations"
    return f, trace


def initial_profiles(grid: RadialGrid, n: int, rng: np.random.Generator):
    """The initialization menu: Gaussian, compact bump, wrong-family extremal."""
    amp = float(rng.uniform(0.5, 2.0))
    width = float(rng.uniform(0.7, 1.8))
    kind = rng.integers(0, 3)
    r = grid.nodes
    if kind == 0:
        vals = amp * np.exp(-(r / width) ** 2)
        v0, beta = amp, math.inf
    elif kind == 1:
        vals = amp * np.maximum(1.0 - (r / (2.0 * width)) ** 2, 0.0) ** 2
        v0, beta = amp, math.inf
    else:
        e = 0.5 * n   # the other family's exponent
        vals = amp * (width / (width ** 2 + r ** 2)) ** e
        v0, beta = amp * width ** (-e), 2.0 * e
    return RadialFn(grid, vals, value_at_zero=v0, tail_exponent=beta,
                    nonnegative=True)


def ascent_estimate_constant(n: int, p: float, trials: int, cfg: SolverConfig,
                             grid: RadialGrid | None = None,
                             hs_grid: HalfspaceGrid | None = None) -> float:
    """Lower-bound estimate of the sharp constant: max Rayleigh quotient
    recorded along fixed-point trajectories from random initializations."""
    if trials < 1:
        raise DomainError("need at least one trial")
    from .grids import build_radial_grid
    if grid is None:
        grid = build_radial_grid(n - 1, 160, "tan", 1.0)
    if hs_grid is None:
        hs_grid = default_halfspace_grid(grid)
    rng = np.random.default_rng(cfg.seed)
    best = -math.inf
    failures = 0
    for _ in range(trials):
        init = initial_profiles(grid, n, rng)
        try:
            _, trace = el_fixed_point(n, p, init, cfg, hs_grid)
        except SolverDivergence as exc:
            failures += 1
            if exc.trace is not None and exc.trace.rayleighs:
                best = max(best, max(exc.trace.rayleighs))
            continue
        best = max(best, max(trace.rayleighs))
    if failures == trials and not math.isfinite(best):
        raise SolverDivergence(f"all {trials} trials diverged")
    return float(best)


def match_extremal_family(f: RadialFn, n: int, kind: str,
                          r_window: float = 10.0):
    """Fit (lambda, amplitude) of the closed-form family to a radial profile.

    Returns (lam, amplitude, sup relative error over nodes with r <= window).
    """
    e = 0.5 * (n - 2) if kind == "conformal" else 0.5 * n
    sel = f.grid.nodes <= r_window
    r = f.grid.nodes[sel]
    y = f.values[sel]
    if np.any(y <= 0.0):
        raise DomainError("profile must be positive on the fit window")

    def best_amp(lam: float):
        # minimax amplitude for multiplicative deviation: geometric midrange
        shape = (lam / (lam * lam + r * r)) ** e
        ratio = y / shape
        amp = math.sqrt(float(np.min(ratio)) * float(np.max(ratio)))
        err = float(np.max(np.abs(ratio / amp - 1.0)))
        return amp, err

    res = minimize_scalar(lambda ll: best_amp(math.exp(ll))[1],
                          bounds=(-3.0, 3.0), method="bounded",
                          options={"xatol": 1e-12})
    lam = math.exp(res.x)
    amp, err = best_amp(lam)
    return lam, amp, err


def radial_about_point(v: PolarFn, tol: float, axis_range=(-2.0, 2.0),
                       n_centers: int = 81, full_2d: bool = False):
    """Center a*e_1 minimizing the angular variation of v, or None.

    The center search runs along the symmetry axis (a planar reflection
    argument pins the second coordinate to zero); ``full_2d`` enables a
    2-D Nelder-Mead fallback.  Returns the center as a length-2 array when
    the minimized relative angular deviation is <= tol.
    """
    radial = v.grid.radial
    ring_mean = np.mean(np.abs(v.values), axis=1)
    vmax = float(np.max(ring_mean))
    good = ring_mean >= 1e-5 * vmax
    r_lo = max(float(radial.nodes[good][0]) * 4.0, 1e-3)
    r_hi = float(radial.nodes[good][-1])
    span = max(abs(axis_range[0]), abs(axis_range[1]))
    r_hi = min(r_hi / 2.0, r_hi - 2.0 * span)
    if r_hi <= r_lo:
        raise DomainError("polar mesh too small for a center scan")
    probes = np.geomspace(r_lo, r_hi, 12)
    phis = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)

    def deviation(center) -> float:
        cx, cy = center
        total = 0.0
        for rho in probes:
            x = cx + rho * np.cos(phis)
            y = cy + rho * np.sin(phis)
            w = v.eval_xy(x, y)
            mean = float(np.mean(np.abs(w)))
            if mean <= 0.0:
                continue
            total = max(total, float(np.std(w)) / mean)
        return total

    grid_a = np.linspace(axis_range[0], axis_range[1], n_centers)
    devs = [deviation((a, 0.0)) for a in grid_a]
    i = int(np.argmin(devs))
    lo = grid_a[max(i - 1, 0)]
    hi = grid_a[min(i + 1, n_centers - 1)]
    res = minimize_scalar(lambda a: deviation((a, 0.0)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    best = np.array([float(res.x), 0.0])
    best_dev = float(res.fun)
    if full_2d:
        from scipy.optimize import minimize
        r2 = minimize(deviation, best, method="Nelder-Mead",
                      options={"xatol": 1e-10, "fatol": 1e-14})
        if r2.fun < best_dev:
            best, best_dev = np.asarray(r2.x), float(r2.fun)
    return best if best_dev <= tol else None


@dataclass(frozen=True)
class ClassifyResult:
    kind: str            # "quadratic_power", "pure_power", or "none"
    c1: float = math.nan
    c2: float = math.nan


FIT_TOL = 1e-6


def classify_inverted_radial(u: RadialFn, alpha: float) -> ClassifyResult:
    """Decide whether u is (c1 r^2 + c2)^(alpha/2), c1 r^alpha, or neither.

    u^(2/alpha) is fit to the linear model c1 r^2 + c2 by least squares with
    relative weights; membership requires pointwise relative fit residual
    <= FIT_TOL.  Pure powers are recognized by the intercept-free fit
    passing the same residual test (exact members have c2 = 0).
    """
    if alpha == 0.0:
        raise DomainError("alpha = 0 is a degenerate case, not classified")
    if np.any(u.values <= 0.0):
        raise DomainError("classification needs strictly positive samples")
    r2 = u.grid.nodes ** 2
    y = np.exp((2.0 / alpha) * np.log(u.values))
    w = 1.0 / y
    A = np.stack([r2 * w, np.ones_like(r2) * w], axis=1)
    coef, *_ = np.linalg.lstsq(A, y * w, rcond=None)
    c1, c2 = float(coef[0]), float(coef[1])
    fit = c1 * r2 + c2
    ok_two = np.all(fit > 0.0) and float(np.max(np.abs(y - fit) / y)) <= FIT_TOL
    a_vec = r2 * w
    c1_pow = float(np.dot(a_vec, y * w) / np.dot(a_vec, a_vec))
    fit_pow = c1_pow * r2
    ok_pow = c1_pow > 0.0 and float(np.max(np.abs(y - fit_pow) / y)) <= FIT_TOL
    if ok_pow:
        return ClassifyResult("pure_power", c1_pow ** (0.5 * alpha))
    if ok_two and c2 > 0.0 and c1 >= -FIT_TOL * abs(c2):
        return ClassifyResult("quadratic_power", max(c1, 0.0), c2)
    return ClassifyResult("none")


def ode_check_1d(x, u, alpha: float) -> float:
    """Max |third difference of u^(2/alpha)| / (2h^3) on a uniform mesh.

    Vanishes (to roundoff amplified by h^-3) exactly on the family
    [a(x-x0)^2 + b]^(alpha/2); at least 7 samples required.
    """
    if alpha == 0.0:
        raise DomainError("alpha must be nonzero")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.size < 7 or x.shape != u.shape:
        raise DomainError("need >= 7 samples on a common mesh")
    h = x[1] - x[0]
    if h <= 0.0 or np.max(np.abs(np.diff(x) - h)) > 1e-9 * abs(h):
        raise DomainError("samples must be uniformly spaced")
    if np.any(u <= 0.0):
        raise DomainError("samples must be strictly positive")
    y = np.exp((2.0 / alpha) * np.log(u))
    third = y[4:] - 2.0 * y[3:-1] + 2.0 * y[1:-3] - y[:-4]
    return float(np.max(np.abs(third)) / (2.0 * h ** 3))
