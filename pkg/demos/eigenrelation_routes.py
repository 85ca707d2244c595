"""Compare the three routes to (-Laplace)^s u = u on even one-dimensional fields.

The extension route treats the trace as a radial profile, so the fields are even.

Run with ``python3 demos/eigenrelation_routes.py``.
"""
import math

import numpy as np

from nonlocal_helmholtz.bernstein import WeightProfile
from nonlocal_helmholtz.extension import ExtensionGeometry, neumann_eigen_error, solve_weighted_extension
from nonlocal_helmholtz.quadrature import PointwiseFunction, pv_fraclap
from nonlocal_helmholtz.spectral import GridFunction, fractional_residual


def residuals(f, s):
    grid = GridFunction.from_function(f, n=64, extent=16 * math.pi)
    pt = PointwiseFunction.from_1d(f, sup_norm=float(np.max(np.abs(grid.values))))
    quad = max(abs(pv_fraclap(pt, [x], s) - f(x)) for x in np.linspace(-3, 3, 7)) / pt.sup_norm
    fld = solve_weighted_extension(f, WeightProfile.fractional(s), ExtensionGeometry(r_max=20.0), l=0, n=1)
    return fractional_residual(grid, s), quad, neumann_eigen_error(fld)


if __name__ == "__main__":
    fields = {"cos x": np.cos, "cos 2x": lambda x: np.cos(2 * x)}
    print(f"{'field':>8} {'s':>5} {'spectral':>10} {'quadrature':>10} {'extension':>10} {'4^s - 1':>8}")
    for name, f in fields.items():
        for s in (0.25, 0.5, 0.75):
            spec, quad, ext = residuals(f, s)
            print(f"{name:>8} {s:5.2f} {spec:10.2e} {quad:10.2e} {ext:10.2e} {4**s - 1:8.4f}")
