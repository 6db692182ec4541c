#!/usr/bin/env python3
"""Grid-convergence study for the Euler-Lagrange fixed point.

Solves the system at (n, p) = (3, 4) on a ladder of mesh resolutions and
reports how the recovered Rayleigh quotient and the family-match error
behave, against the closed-form sharp constant.  Writes a CSV to stdout.
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from halfext.extremals import sharp_constant  # noqa: E402
from halfext.grids import (build_radial_grid, default_halfspace_grid,  # noqa: E402
                           sample_radial)
from halfext.solver import SolverConfig, el_fixed_point, \
    match_extremal_family  # noqa: E402


def run(N_r: int, N_t: int):
    grid = build_radial_grid(2, N_r, "tan", 1.0)
    hs = default_halfspace_grid(grid, N_t)
    init = sample_radial(grid, lambda r: np.exp(-r ** 2), nonnegative=True)
    cfg = SolverConfig(max_iters=400, tol_residual=1e-5)
    start = time.monotonic()
    sol, trace = el_fixed_point(3, 4.0, init, cfg, hs)
    elapsed = time.monotonic() - start
    _, _, err = match_extremal_family(sol, 3, "conformal", 10.0)
    return trace.rayleighs[-1], err, len(trace), elapsed


if __name__ == "__main__":
    target = sharp_constant(3, "conformal")
    print("N_r,N_t,rayleigh,rayleigh_err,family_err,iters,seconds")
    for N_r, N_t in [(64, 48), (96, 64), (128, 80), (160, 96), (224, 128)]:
        ray, err, iters, secs = run(N_r, N_t)
        print(f"{N_r},{N_t},{ray:.10f},{abs(ray - target):.3e},"
              f"{err:.3e},{iters},{secs:.1f}")
