"""Poisson extension of radial boundary data and its dual, via ring kernels.

For radial f on R^{n-1}, the extension (Pf)(x) = (P_{x_n} * f)(x') collapses
to a 1-D integral against the ring kernel

    K(r, s, t) = (2/(n omega_n)) * t * integral over S^{n-2} of
                 dsigma(w) / (r^2 + s^2 - 2 r s w_1 + t^2)^(n/2),

so that (Pf)(r, t) = integral_0^inf K(r, s, t) f(s) s^(n-2) ds.  K is
symmetric in (r, s), and the same kernel drives the dual operator
(Tu)(s) = integral K(s, r, t) u(r, t) r^(n-2) dr dt.

The angular integral has closed forms in the dimensions used here:

    n = 2:  K = (1/pi) * [ t/((r-s)^2+t^2) + t/((r+s)^2+t^2) ]
    n = 3:  K = (t/pi) * 2 E(m) / ( ((r-s)^2+t^2) * sqrt((r+s)^2+t^2) ),
            m = 4 r s / ((r+s)^2 + t^2)   (complete elliptic integral E)
    n = 4:  K = 4 t / ( pi * ((r-s)^2+t^2) * ((r+s)^2+t^2) )

and a Gauss-Legendre fallback in the polar angle for n >= 5 (with panel
subdivision near theta = 0, where the integrand peaks as t -> 0).

As t -> 0 the kernel concentrates in an O(t) spike at s = r.  Rows of the
discretized operator whose height cannot be resolved by the radial mesh are
rebuilt with geometrically refined panels around the diagonal, composed with
a local cubic interpolation stencil, so the operator stays a plain matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe

from .errors import DivergenceError, DomainError
from .grids import AxisymFn, HalfspaceGrid, RadialFn, RadialGrid
from .kernel import kernel_constant, sphere_area
from .quadrature import composite_rule, gauss_legendre, peak_breaks

# rows with height below PEAK_FACTOR * (local mesh spacing) get refined panels
PEAK_FACTOR = 6.0
_PANEL_ORDER = 16
_RING_ORDER = 64


def _ring_closed(n: int, r, s, t):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    amm = (r - s) ** 2 + t * t
    app = (r + s) ** 2 + t * t
    if n == 2:
        return (t / np.pi) * (1.0 / amm + 1.0 / app)
    if n == 3:
        m = np.minimum(4.0 * r * s / app, 1.0)
        return (t / np.pi) * 2.0 * ellipe(m) / (amm * np.sqrt(app))
    if n == 4:
        return 4.0 * t / (np.pi * amm * app)
    raise DomainError(f"no closed ring kernel for n={n}")


def _ring_gl_scalar(n: int, r: float, s: float, t: float, order: int) -> float:
    """Generic angular quadrature for n >= 3 (peak-refined near theta = 0)."""
    amm = (r - s) ** 2 + t * t
    b = 2.0 * r * s
    if b > 0.0:
        theta_w = math.sqrt(amm / (r * s))
        if theta_w < np.pi / 2.0:
            breaks = peak_breaks(0.0, theta_w, 0.0, np.pi)
        else:
            breaks = np.array([0.0, np.pi])
    else:
        breaks = np.array([0.0, np.pi])
    th, w = composite_rule(breaks, order)
    # a - b cos(theta) = amm + b (1 - cos(theta)), free of cancellation
    core = (amm + 2.0 * b * np.sin(0.5 * th) ** 2) ** (-0.5 * n)
    integral = float(np.dot(w, core * np.sin(th) ** (n - 3)))
    return kernel_constant(n) * t * sphere_area(n - 2) * integral


def ring_kernel(n: int, r, s, t, quad_order: int = _RING_ORDER,
                method: str = "auto"):
    """Ring kernel K(r, s, t); symmetric in (r, s), broadcasts over arrays.

    ``method`` is "closed" (n in {2, 3, 4}), "gl" (angular Gauss panels,
    n >= 3), or "auto" (closed form when available).
    """
    if n < 2:
        raise DomainError(f"dimension must be >= 2, got n={n}")
    if np.any(np.asarray(t) <= 0.0):
        raise DomainError("height t must be positive")
    if method == "auto":
        method = "closed" if n <= 4 else "gl"
    if method == "closed":
        out = _ring_closed(n, r, s, t)
        return float(out) if np.ndim(out) == 0 else out
    if method != "gl":
        raise DomainError(f"unknown ring kernel method {method!r}")
    if n == 2:
        return ring_kernel(n, r, s, t, method="closed")
    rr, ss, tt = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float),
                                     np.asarray(t, float))
    out = np.empty(rr.shape, dtype=float)
    for idx in np.ndindex(rr.shape):
        out[idx] = _ring_gl_scalar(n, rr[idx], ss[idx], tt[idx], quad_order)
    return float(out) if out.ndim == 0 else out


def _qt_ring_scalar(n: int, r: float, s: float, t: float, order: int) -> float:
    """Ring reduction of Q_t (used by the commutator bound)."""
    if n == 2:
        c = kernel_constant(2)
        return c * (abs(r - s) / ((r - s) ** 2 + t * t)
                    + (r + s) / ((r + s) ** 2 + t * t))
    amm = (r - s) ** 2 + t * t
    b = 2.0 * r * s
    if b > 0.0:
        theta_w = math.sqrt(amm / (r * s))
        breaks = (peak_breaks(0.0, theta_w, 0.0, np.pi)
                  if theta_w < np.pi / 2.0 else np.array([0.0, np.pi]))
    else:
        breaks = np.array([0.0, np.pi])
    th, w = composite_rule(breaks, order)
    R2 = (r - s) ** 2 + 2.0 * b * np.sin(0.5 * th) ** 2
    core = np.sqrt(R2) * (R2 + t * t) ** (-0.5 * n)
    integral = float(np.dot(w, core * np.sin(th) ** (n - 3)))
    return kernel_constant(n) * sphere_area(n - 2) * integral


def qt_ring(n: int, r, s, t, quad_order: int = _RING_ORDER):
    rr, ss, tt = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float),
                                     np.asarray(t, float))
    out = np.empty(rr.shape, dtype=float)
    for idx in np.ndindex(rr.shape):
        out[idx] = _qt_ring_scalar(n, rr[idx], ss[idx], tt[idx], quad_order)
    return float(out) if out.ndim == 0 else out


def _lagrange_stencils(grid: RadialGrid, query: np.ndarray):
    """Local 4-point cubic Lagrange stencils in the grid's parameter coordinate.

    Returns (columns, weights), both shaped (len(query), 4); stencils clamp at
    the mesh ends, so slightly-outside queries extrapolate politely.
    """
    xn = grid.parameter(grid.nodes)
    xq = grid.parameter(query)
    start = np.clip(np.searchsorted(xn, xq) - 2, 0, grid.size - 4)
    cols = start[:, None] + np.arange(4)[None, :]
    xs = xn[cols]                                   # (Q, 4)
    diff = xq[:, None] - xs                         # (Q, 4)
    pair = xs[:, :, None] - xs[:, None, :]
    four = np.arange(4)
    pair[:, four, four] = 1.0
    denom = np.prod(pair, axis=2)                   # prod_{b!=a}(x_a - x_b)
    full = np.prod(diff, axis=1)
    safe = np.where(diff == 0.0, 1.0, diff)
    weights = full[:, None] / (safe * denom)
    hits = diff == 0.0
    rows_hit = hits.any(axis=1)
    weights[rows_hit] = hits[rows_hit].astype(float)
    return cols, weights


def _data_ladder(in_grid: RadialGrid) -> np.ndarray:
    """Geometric breakpoints resolving the decades of the mesh itself."""
    pts = [0.0, in_grid.r_max]
    w = in_grid.scale / 64.0
    while w < in_grid.r_max:
        pts.append(w)
        w *= 4.0
    return np.asarray(sorted(pts))


def _diagonal_breaks(r_out: float, t: float, in_grid: RadialGrid) -> np.ndarray:
    """Panels resolving both the kernel diagonal at (r_out, t) and the data."""
    return np.union1d(peak_breaks(r_out, max(t, 1e-9), 0.0, in_grid.r_max),
                      _data_ladder(in_grid))


def _refined_row(n: int, r_out: float, t: float, in_grid: RadialGrid,
                 order: int = _PANEL_ORDER) -> np.ndarray:
    """Matrix row for one (r_out, t) with diagonal-peak panel quadrature."""
    d = in_grid.d
    s, w = composite_rule(_diagonal_breaks(r_out, t, in_grid), order)
    keep = s > 0.0
    s, w = s[keep], w[keep]
    kern = ring_kernel(n, r_out, s, t)
    coeff = w * kern * s ** (d - 1)
    cols, lw = _lagrange_stencils(in_grid, s)
    row = np.zeros(in_grid.size)
    np.add.at(row, cols.ravel(), (coeff[:, None] * lw).ravel())
    return row


def _kernel_matrix(n: int, out_nodes: np.ndarray, in_grid: RadialGrid,
                   t: float, peak_factor: float = PEAK_FACTOR) -> np.ndarray:
    """Matrix taking in-grid samples to extension values at out_nodes (one t)."""
    M = ring_kernel(n, out_nodes[:, None], in_grid.nodes[None, :], t)
    M = M * in_grid.weights[None, :]
    flagged = np.nonzero(t < peak_factor * in_grid.local_spacing(out_nodes))[0]
    if flagged.size == 0:
        return M
    # batch the refined rows: one kernel evaluation over all panel nodes
    d = in_grid.d
    all_s, all_w, row_of = [], [], []
    for j in flagged:
        breaks = _diagonal_breaks(float(out_nodes[j]), t, in_grid)
        s, w = composite_rule(breaks, _PANEL_ORDER)
        keep = s > 0.0
        all_s.append(s[keep])
        all_w.append(w[keep])
        row_of.append(np.full(keep.sum(), j))
    s = np.concatenate(all_s)
    w = np.concatenate(all_w)
    rows = np.concatenate(row_of)
    kern = ring_kernel(n, out_nodes[rows], s, t)
    coeff = w * kern * s ** (d - 1)
    cols, lw = _lagrange_stencils(in_grid, s)
    M[flagged, :] = 0.0
    np.add.at(M, (np.repeat(rows, 4), cols.ravel()),
              (coeff[:, None] * lw).ravel())
    return M


@dataclass(eq=False)
class PoissonOperator:
    """Discretized extension/dual pair on a fixed boundary x half-space mesh.

    Built once per (grids, n) and cached; both directions reduce to per-height
    matrix products, so solver iterations are cheap.
    """

    n: int
    boundary: RadialGrid
    halfspace: HalfspaceGrid
    matrices: np.ndarray          # (N_t, N_out, N_in)
    dual_matrices: np.ndarray     # (N_t, N_bnd, N_rad); same array if grids match

    def extend(self, f_values: np.ndarray) -> np.ndarray:
        """(Pf)(r_j, t_k) for boundary samples f, shape (N_r, N_t)."""
        return np.einsum("kji,i->jk", self.matrices, f_values)

    def dual(self, u_values: np.ndarray) -> np.ndarray:
        """(Tu)(s_i) for half-space samples u(r_j, t_k)."""
        wt = self.halfspace.heights.weights
        return np.einsum("kij,jk,k->i", self.dual_matrices, u_values, wt)


_OPERATOR_CACHE: dict = {}
_CACHE_LIMIT = 12      # matrices are ~N_t * N^2 doubles; cap the cache


def _cache_put(cache: dict, key, value) -> None:
    if len(cache) >= _CACHE_LIMIT:
        cache.pop(next(iter(cache)))
    cache[key] = value


def get_operator(n: int, boundary: RadialGrid,
                 halfspace: HalfspaceGrid) -> PoissonOperator:
    if boundary.d != n - 1 or halfspace.n != n:
        raise DomainError("grid dimensions are inconsistent with n")
    key = (n, id(boundary), id(halfspace.radial), id(halfspace.heights))
    hit = _OPERATOR_CACHE.get(key)
    if hit is not None:
        return hit[1]
    heights = halfspace.heights.nodes
    out_nodes = halfspace.radial.nodes
    mats = np.stack([_kernel_matrix(n, out_nodes, boundary, float(t))
                     for t in heights])
    if halfspace.radial is boundary:
        dual_mats = mats
    else:
        dual_mats = np.stack([
            _kernel_matrix(n, boundary.nodes, halfspace.radial, float(t))
            for t in heights])
    op = PoissonOperator(n, boundary, halfspace, mats, dual_mats)
    _cache_put(_OPERATOR_CACHE, key, ((boundary, halfspace), op))
    return op


def clear_operator_cache() -> None:
    _OPERATOR_CACHE.clear()
    _DUAL_CACHE.clear()


def _check_integrable(f: RadialFn) -> None:
    beta = f.tail_exponent
    if math.isnan(beta):
        beta = f.fitted_tail()
    if not math.isnan(beta) and beta <= 0.0:
        raise DivergenceError(
            f"boundary data with tail exponent {beta:.3g} <= 0 is not "
            "integrable against the kernel")


def poisson_extend(f: RadialFn, grid: HalfspaceGrid) -> AxisymFn:
    """Harmonic extension of radial boundary data onto a half-space mesh."""
    n = grid.n
    if f.grid.d != n - 1:
        raise DomainError("boundary data dimension does not match the mesh")
    _check_integrable(f)
    op = get_operator(n, f.grid, grid)
    return AxisymFn(grid, op.extend(f.values))


def dual_extend(u: AxisymFn, out_grid: RadialGrid) -> RadialFn:
    """(Tu)(s) = integral of P(x, s) u(x) dx sampled on a boundary mesh."""
    n = u.grid.n
    if out_grid.d != n - 1:
        raise DomainError("output grid dimension does not match the mesh")
    if out_grid is u.grid.radial:
        op = get_operator(n, out_grid, u.grid)
        vals = op.dual(u.values)
    else:
        wt = u.grid.heights.weights
        mats = _dual_matrices(n, out_grid, u.grid)
        vals = np.einsum("kij,jk,k->i", mats, u.values, wt)
    return RadialFn(out_grid, vals)


_DUAL_CACHE: dict = {}


def _dual_matrices(n: int, out_grid: RadialGrid, hs: HalfspaceGrid) -> np.ndarray:
    key = (n, id(out_grid), id(hs.radial), id(hs.heights))
    hit = _DUAL_CACHE.get(key)
    if hit is not None:
        return hit[1]
    mats = np.stack([_kernel_matrix(n, out_grid.nodes, hs.radial, float(t))
                     for t in hs.heights.nodes])
    _cache_put(_DUAL_CACHE, key, ((out_grid, hs), mats))
    return mats


def extend_at(f: RadialFn, r, t) -> np.ndarray:
    """Pointwise (Pf)(r, t) at arbitrary heights t > 0 (no mesh in t).

    Uses the plain grid rule when the mesh resolves the kernel at that height
    and diagonal-refined panels otherwise.
    """
    _check_integrable(f)
    n = f.grid.d + 1
    r = np.atleast_1d(np.asarray(r, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r, t = np.broadcast_arrays(r, t)
    if np.any(t <= 0.0):
        raise DomainError("heights must be positive")
    out = np.empty(r.shape, dtype=float)
    spacing = f.grid.local_spacing(r)
    plain = t >= PEAK_FACTOR * spacing
    if np.any(plain):
        K = ring_kernel(n, r[plain][:, None], f.grid.nodes[None, :],
                        t[plain][:, None])
        out[plain] = (K * f.grid.weights[None, :]) @ f.values
    for idx in np.nonzero(~plain)[0]:
        d = f.grid.d
        breaks = _diagonal_breaks(float(r[idx]), float(t[idx]), f.grid)
        s, w = composite_rule(breaks, _PANEL_ORDER)
        keep = s > 0.0
        s, w = s[keep], w[keep]
        kern = ring_kernel(n, float(r[idx]), s, float(t[idx]))
        out[idx] = float(np.dot(w * kern * s ** (d - 1), f.eval(s)))
    return out


def _kernel_mass_many(n: int, s_arr: np.ndarray, t: float) -> np.ndarray:
    """Quadrature of K(., s, t) r^(d-1) dr over (0, inf) for many s at once."""
    d = n - 1
    all_r, all_w, seg = [], [], [0]
    for s in s_arr:
        breaks = peak_breaks(float(s), max(t, 1e-6), 0.0,
                             max(8.0 * s, 64.0 * t, 16.0))
        r, w = composite_rule(breaks, 24, tail_scale=max(float(s), t, 1.0))
        keep = r > 0.0
        all_r.append(r[keep])
        all_w.append(w[keep])
        seg.append(seg[-1] + int(keep.sum()))
    r = np.concatenate(all_r)
    w = np.concatenate(all_w)
    s_rep = np.repeat(np.asarray(s_arr, dtype=float),
                      np.diff(np.asarray(seg)))
    contrib = w * ring_kernel(n, r, s_rep, t) * r ** (d - 1)
    return np.add.reduceat(contrib, np.asarray(seg[:-1]))


def kernel_mass(n: int, s: float, t: float) -> float:
    """Quadrature of K(., s, t) r^(d-1) dr over (0, inf); exactly 1 in theory."""
    return float(_kernel_mass_many(n, np.asarray([s]), t)[0])


def slab_mass(f: RadialFn, a: float, n_heights: int = 24) -> float:
    """Integral of Pf over the slab {0 < x_n < a}.

    Computed honestly: the spatial integral at each height uses diagonal-
    refined panels (independently of the Fubini identity it is meant to
    check), then Gauss quadrature in the height.  For f >= 0 with unit mass
    the result equals a.
    """
    if a <= 0.0:
        raise DomainError(f"slab height must be positive, got {a}")
    if np.any(f.values < 0.0):
        raise DomainError("slab mass is defined for nonnegative data")
    _check_integrable(f)
    n = f.grid.d + 1
    x, w = gauss_legendre(n_heights)
    t_nodes = 0.5 * a * (x + 1.0)
    t_weights = 0.5 * a * w
    sphere = f.grid.sphere
    total = 0.0
    for t, wt in zip(t_nodes, t_weights):
        masses = _kernel_mass_many(n, f.grid.nodes, float(t))
        level = sphere * float(np.dot(f.grid.weights, f.values * masses))
        total += wt * level
    return total


def boundary_convolution(f: RadialFn, t: float, kernel: str = "P",
                         quad_order: int = _RING_ORDER) -> np.ndarray:
    """(P_t * f) or (Q_t * f) sampled on f's own grid (radial data only)."""
    if t <= 0.0:
        raise DomainError(f"height t must be positive, got {t}")
    n = f.grid.d + 1
    nodes = f.grid.nodes
    if kernel == "P":
        M = _kernel_matrix(n, nodes, f.grid, t)
        return M @ f.values
    if kernel != "Q":
        raise DomainError(f"unknown kernel {kernel!r}")
    K = qt_ring(n, nodes[:, None], nodes[None, :], t, quad_order)
    M = K * f.grid.weights[None, :]
    spacing = f.grid.local_spacing(nodes)
    for j in np.nonzero(t < PEAK_FACTOR * spacing)[0]:
        r_out = float(nodes[j])
        breaks = _diagonal_breaks(r_out, t, f.grid)
        s, w = composite_rule(breaks, _PANEL_ORDER)
        keep = s > 0.0
        s, w = s[keep], w[keep]
        coeff = w * qt_ring(n, r_out, s, t, quad_order) * s ** (f.grid.d - 1)
        cols, lw = _lagrange_stencils(f.grid, s)
        M[j, :] = 0.0
        np.add.at(M[j], cols.ravel(), (coeff[:, None] * lw).ravel())
    return M @ f.values


def commutator_gap(f: RadialFn, phi_lip: float, phi: RadialFn,
                   t: float) -> float:
    """Largest violation of the Lipschitz commutator bound at height t.

    Returns max over the grid of |P_t*(phi f) - phi (P_t*f)| minus
    phi_lip * t * (Q_t*f); nonpositive up to quadrature error when phi_lip
    really dominates the Lipschitz seminorm of phi.
    """
    if phi_lip < 0.0:
        raise DomainError("Lipschitz seminorm must be >= 0")
    if t <= 0.0:
        raise DomainError(f"height t must be positive, got {t}")
    if np.any(f.values < 0.0):
        raise DomainError("the commutator bound is stated for f >= 0")
    if phi.grid is not f.grid:
        raise DomainError("phi must be sampled on the same grid as f")
    phif = RadialFn(f.grid, phi.values * f.values,
                    phi.value_at_zero * f.value_at_zero,
                    tail_exponent=f.tail_exponent)
    lhs = np.abs(boundary_convolution(phif, t)
                 - phi.values * boundary_convolution(f, t))
    rhs = phi_lip * t * boundary_convolution(f, t, kernel="Q")
    return float(np.max(lhs - rhs))
