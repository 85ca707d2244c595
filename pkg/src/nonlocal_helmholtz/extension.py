"""Weighted extension problems on the half space.

The extension of a trace ``v(r)`` solves the weighted divergence equation

    a(t) (v_rr + (k/r) v_r) + (a(t) v_t)_t = 0,    k = 2l + n - 1,

which is the equation for ``r^-l`` times the degree-``l`` harmonic component
of an ``(n+1)``-dimensional field. For ``a(t) = t^(1-2s)`` the separated
solution ``v(r) phi(t)`` uses the profile ``phi(t) = 2^(1-s)/Gamma(s) t^s K_s(t)``
and the weighted Neumann flux ``-lim a(t) v_t`` equals ``c_ext(s) (-Laplace)^s v``
with ``c_ext(s) = 2^(1-2s) Gamma(1-s)/Gamma(s)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse, special
from scipy.sparse import linalg as splinalg

from .bernstein import ProfilePhi, WeightProfile
from .specfun import ClassicalSolution, SphericalHarmonic, spherical_harmonic_eval

__all__ = [
    "ExtensionGeometry",
    "ExtensionField",
    "EnergySample",
    "ProfilePhi",
    "MeshTooCoarseError",
    "UnderResolvedError",
    "AliasingError",
    "extension_constant",
    "vertical_mesh",
    "profile_closed_form",
    "profile_ode_residual",
    "solve_profile_phi",
    "solve_weight_profile",
    "neumann_trace",
    "solve_weighted_extension",
    "separated_field",
    "neumann_eigen_error",
    "separation_error",
    "sphere_grid",
    "harmonic_decompose",
    "harmonic_synthesize",
    "reduced_shift",
    "mu_split_residuals",
    "energy_H",
    "energy_monotonicity_scan",
    "weighted_energy_balance",
]


class MeshTooCoarseError(ValueError):
    """The vertical mesh cannot resolve the profile."""


class UnderResolvedError(ValueError):
    """Geometry or weight singularity is not resolved by the grid."""


class AliasingError(ValueError):
    """Sphere samples contain harmonics above the requested degree."""


def extension_constant(s: float) -> float:
    """``c_ext(s) = 2^(1-2s) Gamma(1-s) / Gamma(s)``; equals 1 at ``s = 1/2``."""
    return 2.0 ** (1.0 - 2.0 * s) * math.gamma(1.0 - s) / math.gamma(s)


def _power_order(weight: WeightProfile) -> float | None:
    """``s`` with ``a = t^(1-2s)`` when the weight is such a power law."""
    if weight.alpha_hint is None or not -1.0 < weight.alpha_hint < 1.0:
        return None
    return 0.5 * (1.0 - weight.alpha_hint)


def vertical_mesh(s: float | None = None, t_max: float = 20.0, cells: int = 400,
                  grading: float | None = None) -> np.ndarray:
    """Graded mesh ``t_j = t_max (j/M)^gamma`` with ``gamma = max(2, 2/(2-2s))``."""
    if grading is None:
        grading = 2.0 if s is None else max(2.0, 2.0 / (2.0 - 2.0 * s))
    return t_max * np.linspace(0.0, 1.0, cells + 1) ** grading


# --------------------------------------------------------------------------
# the separated profile


def profile_closed_form(s: float, t):
    """``phi(t)`` and ``phi'(t)`` from the modified Bessel closed form."""
    t = np.asarray(t, dtype=float)
    c = 2.0 ** (1.0 - s) / math.gamma(s)
    pos = np.where(t > 0, t, 1.0)
    phi = np.where(t > 0, c * pos**s * special.kv(s, pos), 1.0)
    with np.errstate(over="ignore"):
        dphi = np.where(t > 0, -c * pos**s * special.kv(1.0 - s, pos), -np.inf if s < 0.5 else
                        (-1.0 if s == 0.5 else 0.0))
    return phi, dphi


def profile_ode_residual(s: float, t) -> np.ndarray:
    """``|phi'' + ((1-2s)/t) phi' - phi|`` with derivatives from ``scipy.special.kvp``."""
    t = np.asarray(t, dtype=float)
    c = 2.0 ** (1.0 - s) / math.gamma(s)
    k0, k1, k2 = special.kv(s, t), special.kvp(s, t, 1), special.kvp(s, t, 2)
    phi = c * t**s * k0
    d1 = c * (s * t ** (s - 1) * k0 + t**s * k1)
    d2 = c * (s * (s - 1) * t ** (s - 2) * k0 + 2 * s * t ** (s - 1) * k1 + t**s * k2)
    return np.abs(d2 + (1.0 - 2.0 * s) / t * d1 - phi)


def solve_profile_phi(s: float, mesh=None, max_step: float = 0.5, tol: float = 1e-6) -> ProfilePhi:
    """Bounded profile ``phi`` with ``phi(0) = 1`` for the weight ``t^(1-2s)``.

    The closed form is the decaying solution; the growing companion built on
    ``I_s`` is excluded by construction. The ODE residual is checked on the
    mesh nodes in ``[1e-3, 20]``.

    Raises
    ------
    MeshTooCoarseError
        If the mesh does not start at 0, has a step above ``max_step``, or the
        residual check fails.
    """
    if not 0 < s < 1:
        raise ValueError(f"profile needs 0 < s < 1, got {s}")
    mesh = vertical_mesh(s) if mesh is None else np.asarray(mesh, dtype=float)
    if mesh[0] != 0 or np.any(np.diff(mesh) <= 0):
        raise MeshTooCoarseError("mesh must start at 0 and increase strictly")
    if np.max(np.diff(mesh)) > max_step:
        raise MeshTooCoarseError(f"mesh step {np.max(np.diff(mesh)):.3g} exceeds {max_step}")
    phi, dphi = profile_closed_form(s, mesh)
    probe = mesh[(mesh >= 1e-3) & (mesh <= 20.0)]
    if probe.size and np.max(profile_ode_residual(s, probe)) > tol:
        raise MeshTooCoarseError("profile residual check failed")
    return ProfilePhi(f"power:{s:g}", mesh, phi, dphi, s=s)


def _vertical_integrals(weight: WeightProfile, mesh: np.ndarray):
    """Dual-cell integrals of ``a`` and cell integrals of ``1/a``."""
    half = 0.5 * (mesh[1:] + mesh[:-1])
    dual_edges = np.concatenate(([mesh[0]], half, [mesh[-1]]))
    W = weight.cell_integrals(dual_edges, 1.0)
    B = weight.cell_integrals(mesh, -1.0)
    return W, B


def _first_cell_moment(weight: WeightProfile, t1: float) -> float:
    """``Q = int_0^t1 A(t)/a(t) dt`` with ``A(t) = int_0^t a``.

    If the flux ``F = a v_t`` varies like ``F0 - g A(t)`` on ``[0, t1]`` then
    ``v(t1) - v(0) = F0 int_0^t1 1/a - g Q``, which recovers ``F0``.
    """
    alpha = weight.alpha_hint
    if alpha is not None:
        return t1 * t1 / (2.0 * (alpha + 1.0))
    from scipy import integrate

    def A(t):
        return integrate.quad(lambda x: float(weight(x)), 0.0, t, limit=200)[0]

    return integrate.quad(lambda t: A(t) / float(weight(t)), 0.0, t1, limit=200)[0]


def _flux_node(mesh: np.ndarray, height: float) -> int:
    """First node at or above ``height``.

    Differences ``v_j - v_0`` over very thin bottom cells lose everything to
    roundoff on strongly graded meshes, so the flux is read off a node a
    little way up.
    """
    return max(1, int(np.searchsorted(mesh, height)))


def solve_weight_profile(weight: WeightProfile, mesh=None, label: str = "numeric",
                         flux_height: float = 1e-4) -> ProfilePhi:
    """Decaying solution of ``(a phi')' = a phi`` with ``phi(0) = 1`` and ``phi(T) = 0``.

    Flux-conservative finite volumes with exact cell integrals of ``a`` and
    ``1/a``; the derivative samples are fluxes divided by ``a``, and the
    boundary flux at 0 is recovered from the first cell.
    """
    mesh = vertical_mesh(_power_order(weight)) if mesh is None else np.asarray(mesh, dtype=float)
    W, B = _vertical_integrals(weight, mesh)
    M = mesh.size - 1
    main = 1.0 / B[:-1] + 1.0 / B[1:] + W[1:M]
    off = -1.0 / B[1:-1]
    A = sparse.diags([off, main, off], [-1, 0, 1], format="csc")
    rhs = np.zeros(M - 1)
    rhs[0] = 1.0 / B[0]
    phi = np.concatenate(([1.0], splinalg.spsolve(A, rhs), [0.0]))
    flux_half = np.diff(phi) / B
    flux = np.empty_like(phi)
    j = _flux_node(mesh, flux_height)
    flux[0] = (phi[j] - phi[0] - phi[0] * _first_cell_moment(weight, mesh[j])) / np.sum(B[:j])
    flux[1:-1] = 0.5 * (flux_half[1:] + flux_half[:-1])
    flux[-1] = flux_half[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.where(mesh > 0, flux / weight(np.where(mesh > 0, mesh, 1.0)), np.nan)
    return ProfilePhi(label, mesh, phi, dphi, boundary_flux=float(flux[0]))


def neumann_trace(phi: ProfilePhi, s: float, tol: float = 1e-3) -> float:
    """Limit of ``t^(1-2s) phi'(t)`` at 0 by Richardson extrapolation.

    The three smallest positive mesh points are fitted to
    ``L + A t^(2-2s) + B t^2``, which are the leading terms of the small-``t``
    expansion. The two-point estimate that ignores ``B`` must agree with the
    three-point one to ``tol`` relative.
    """
    t = phi.t[phi.t > 0][:3]
    if t.size < 3:
        raise ValueError("need three positive mesh points")
    dphi = phi.dphi[phi.t > 0][:3]
    g = t ** (1.0 - 2.0 * s) * dphi
    p = 2.0 - 2.0 * s
    V3 = np.stack([np.ones(3), t**p, t**2], axis=1)
    three = np.linalg.solve(V3, g)[0] if abs(p - 2.0) > 1e-12 else np.linalg.solve(V3[:, :2], g[:2])[0]
    two = np.linalg.solve(np.stack([np.ones(2), t[:2] ** p], axis=1), g[:2])[0]
    if not np.isfinite(three) or abs(three - two) > tol * abs(three):
        raise ArithmeticError("Richardson extrapolation of the Neumann limit did not converge")
    return float(three)


# --------------------------------------------------------------------------
# extension fields


@dataclass
class ExtensionGeometry:
    """Truncated quarter plane ``[0, r_max] x [0, t_max]`` in the reduced variables.

    ``lateral`` selects the condition at ``r_max``: ``"ansatz"`` imposes
    ``trace(r) phi(t)`` (requires a callable trace), ``"window"`` tapers the
    trace to zero over the last ``window_fraction`` of radii. The Neumann
    flux is read off the first node at or above ``flux_height``.
    """

    r_max: float = 40.0
    radial_step: float = 0.1
    t_max: float = 20.0
    vertical_cells: int = 400
    grading: float | None = None
    lateral: str = "ansatz"
    window_fraction: float = 0.1
    flux_height: float = 1e-4

    def radii(self) -> np.ndarray:
        count = int(round(self.r_max / self.radial_step))
        if count < 8:
            raise UnderResolvedError("radial grid needs at least 8 cells")
        return self.radial_step * np.arange(count + 1)


@dataclass
class ExtensionField:
    """Samples ``v(r_i, t_j)`` of a reduced extension field.

    ``flux0`` holds ``lim a(t) v_t`` at ``t = 0`` for each radius.
    """

    r: np.ndarray
    t: np.ndarray
    values: np.ndarray
    weight: WeightProfile
    n: int
    l: int
    flux0: np.ndarray
    dv_dr: np.ndarray | None = None
    kind: str = "solved"
    profile: ProfilePhi | None = None
    residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def trace(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def k(self) -> int:
        return 2 * self.l + self.n - 1

    def radial_derivative(self) -> np.ndarray:
        if self.dv_dr is None:
            self.dv_dr = _radial_gradient(self.values, self.r[1] - self.r[0])
        return self.dv_dr


def _radial_gradient(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order ``d/dr`` along axis 0 using evenness at ``r = 0``."""
    ext = np.concatenate((values[2:0:-1], values), axis=0)
    out = np.empty_like(values)
    inner = (-ext[4:] + 8 * ext[3:-1] - 8 * ext[1:-3] + ext[:-4]) / (12 * h)
    out[:-2] = inner
    # one-sided fourth-order differences at the outer edge
    v = values
    out[-2] = (-3 * v[-1] - 10 * v[-2] + 18 * v[-3] - 6 * v[-4] + v[-5]) / (-12 * h)
    out[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    return out


def _radial_operator(count: int, h: float, k: int) -> sparse.csr_matrix:
    """Fourth-order ``v'' + (k/r) v'`` on nodes ``0..count-1`` with two ghost columns.

    Columns ``count`` and ``count + 1`` are the boundary values beyond the last
    unknown; negative indices fold back by evenness.
    """
    rows, cols, vals = [], [], []
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    for i in range(count):
        if i == 0:
            coef = (k + 1) * c2
        else:
            coef = c2 + (k / (i * h)) * c1
        for o, c in zip(range(-2, 3), coef):
            rows.append(i)
            cols.append(abs(i + o))
            vals.append(c)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(count, count + 2))


def _window(r: np.ndarray, r_max: float, fraction: float) -> np.ndarray:
    start = (1.0 - fraction) * r_max
    x = np.clip((r - start) / (r_max - start), 0.0, 1.0)
    return np.cos(0.5 * math.pi * x) ** 2


def _profile_for(weight: WeightProfile, mesh: np.ndarray) -> ProfilePhi:
    s = _power_order(weight)
    if s is not None:
        return solve_profile_phi(s, mesh, max_step=np.inf)
    return solve_weight_profile(weight, mesh)


def solve_weighted_extension(trace, weight: WeightProfile, geometry: ExtensionGeometry | None = None,
                             l: int = 0, n: int = 2, residual_tol: float = 1e-8) -> ExtensionField:
    """Finite-volume solve of the reduced weighted extension problem.

    Parameters
    ----------
    trace : callable or ndarray
        Reduced trace ``v(r)``; arrays are sampled on ``geometry.radii()`` plus
        two ghost radii and force the window lateral condition.
    weight : WeightProfile
    geometry : ExtensionGeometry, optional
    l, n : int
        Harmonic degree and base dimension; they enter through ``k = 2l+n-1``.

    Returns
    -------
    ExtensionField
        Includes the Neumann flux row, recovered from the first cell with the
        flux varying linearly in ``int_0^t a``.
    """
    if n < 1 or l < 0:
        raise ValueError("need n >= 1 and l >= 0")
    geo = geometry or ExtensionGeometry()
    r = geo.radii()
    h = r[1] - r[0]
    nr = r.size - 1
    r_ext = h * np.arange(nr + 2)
    s = _power_order(weight)
    mesh = vertical_mesh(s, geo.t_max, geo.vertical_cells, geo.grading)
    M = mesh.size - 1
    prof = _profile_for(weight, mesh)
    lateral = geo.lateral
    if callable(trace):
        tr = np.asarray(trace(r_ext), dtype=float)
    else:
        tr = np.asarray(trace, dtype=float)
        if tr.shape != (nr + 2,):
            raise ValueError(f"trace array must have {nr + 2} samples (grid plus two ghosts)")
        lateral = "window"
    if lateral == "window":
        tr = tr * _window(r_ext, geo.r_max, geo.window_fraction)
    elif lateral != "ansatz":
        raise ValueError(f"unknown lateral condition {lateral!r}")
    if not np.all(np.isfinite(tr)):
        raise ValueError("trace must be finite")

    full = np.zeros((M + 1, nr + 2))
    full[0] = tr
    full[M] = tr * prof.phi[-1]
    if lateral == "ansatz":
        full[1:M, nr:] = np.outer(prof.phi[1:M], tr[nr:])

    W, B = _vertical_integrals(weight, mesh)
    Lr = _radial_operator(nr, h, 2 * l + n - 1)
    Tv = sparse.diags([1.0 / B[:-1], -(1.0 / B[:-1] + 1.0 / B[1:]), 1.0 / B[1:]], [0, 1, 2],
                      shape=(M - 1, M + 1))
    E = sparse.eye(nr, nr + 2)
    A = (sparse.kron(sparse.diags(W[1:M], 1, shape=(M - 1, M + 1)), Lr) + sparse.kron(Tv, E)).tocsc()
    jj, ii = np.meshgrid(np.arange(M + 1), np.arange(nr + 2), indexing="ij")
    unknown = ((jj >= 1) & (jj < M) & (ii < nr)).ravel()
    flat = full.ravel()
    A_u = A[:, np.flatnonzero(unknown)]
    rhs = -(A[:, np.flatnonzero(~unknown)] @ flat[~unknown])
    try:
        x = splinalg.spsolve(A_u.tocsc(), rhs)
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"extension system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("extension solve produced non-finite values")
    flat = flat.copy()
    flat[unknown] = x
    full = flat.reshape(M + 1, nr + 2)
    res = A_u @ x - rhs
    scale = abs(A_u).max() * max(np.max(np.abs(x)), 1e-300) + np.max(np.abs(rhs))
    rel = float(np.max(np.abs(res)) / scale) if scale > 0 else 0.0
    if rel > residual_tol:
        raise np.linalg.LinAlgError(f"linear residual {rel:.2e} above {residual_tol:.0e}")

    values = full[:, : nr + 1].T.copy()
    Lr0 = (Lr @ full[0]).astype(float)
    j = _flux_node(mesh, geo.flux_height)
    Q = _first_cell_moment(weight, mesh[j])
    Bj = float(np.sum(B[:j]))
    flux0 = np.empty(nr + 1)
    flux0[:nr] = (full[j, :nr] - full[0, :nr] + Q * Lr0) / Bj
    flux0[nr] = (full[j, nr] - full[0, nr]) / Bj
    return ExtensionField(r, mesh, values, weight, n, l, flux0, kind="solved", profile=prof,
                          residual=rel, meta={"lateral": lateral, "B": B, "W": W})


def separated_field(solution: ClassicalSolution | Callable, weight: WeightProfile, r,
                    mesh=None, derivative: Callable | None = None) -> ExtensionField:
    """Product field ``v(r) phi(t)`` on a radial grid.

    For a :class:`ClassicalSolution` the reduced trace is ``r^-nu J_nu(r)``
    (``nu = n/2 + l - 1``) and its derivative ``-r^-nu J_{nu+1}(r)`` is used
    exactly; callables need ``derivative`` or fall back to finite differences.
    """
    r = np.asarray(r, dtype=float)
    s = _power_order(weight)
    mesh = vertical_mesh(s) if mesh is None else np.asarray(mesh, dtype=float)
    prof = _profile_for(weight, mesh)
    if isinstance(solution, ClassicalSolution):
        n, l, nu = solution.dim, solution.harmonic_degree, solution.order
        v = solution.reduced(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            dv = -solution.coefficient * np.where(r > 0, special.jv(nu + 1, r) / np.power(r, nu), 0.0)
    else:
        n, l = 2, 0
        v = np.asarray(solution(r), dtype=float)
        dv = np.asarray(derivative(r), dtype=float) if derivative else np.gradient(v, r, edge_order=2)
    c = prof.boundary_flux if s is None else -extension_constant(s)
    values = np.outer(v, prof.phi)
    return ExtensionField(r, mesh, values, weight, n, l, c * v, dv_dr=np.outer(dv, prof.phi),
                          kind="separated", profile=prof)


def neumann_eigen_error(field: ExtensionField, c: float | None = None, interior: float = 0.9) -> float:
    """``max |(-flux0)/c - trace| / max|trace|`` over ``r <= interior * r_max``.

    ``c`` defaults to ``c_ext(s)`` for power weights and the profile's own
    boundary flux otherwise, which calibrates the constant on the weight.
    """
    if c is None:
        s = _power_order(field.weight)
        c = extension_constant(s) if s is not None else -field.profile.boundary_flux
    mask = field.r <= interior * field.r[-1]
    tr = field.trace[mask]
    norm = np.max(np.abs(tr))
    if norm == 0:
        return 0.0
    return float(np.max(np.abs(-field.flux0[mask] / c - tr)) / norm)


def separation_error(field: ExtensionField) -> float:
    """``max |v - trace(r) phi(t)|`` against the profile used by the solve."""
    ref = np.outer(field.trace, field.profile.phi)
    return float(np.max(np.abs(field.values - ref)))


# --------------------------------------------------------------------------
# harmonic reduction


def sphere_grid(n: int, l_max: int):
    """Quadrature grid exact for products of harmonics of degree ``<= 2 l_max + 1``.

    Returns ``(angles, weights)`` where ``angles`` is a tuple of arrays
    (``theta`` for ``n = 2``; polar and azimuth for ``n = 3``).
    """
    if n == 2:
        count = 4 * l_max + 4
        theta = 2 * math.pi * np.arange(count) / count
        return (theta,), np.full(count, 2 * math.pi / count)
    if n == 3:
        x, w = np.polynomial.legendre.leggauss(2 * l_max + 2)
        nphi = 4 * l_max + 4
        phi = 2 * math.pi * np.arange(nphi) / nphi
        P, F = np.meshgrid(np.arccos(x), phi, indexing="ij")
        Wt = np.outer(w, np.full(nphi, 2 * math.pi / nphi))
        return (P.ravel(), F.ravel()), Wt.ravel()
    raise NotImplementedError("sphere grids for n in (2, 3) only")


def _basis(n: int, l_max: int):
    if n == 2:
        keys = [(0, 0)] + [(l, m) for l in range(1, l_max + 1) for m in (l, -l)]
    else:
        keys = [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
    return keys


def harmonic_decompose(samples, n: int, l_max: int, tol: float = 1e-8) -> dict:
    """Project sphere samples on the orthonormal real harmonics up to ``l_max``.

    ``samples`` are values at :func:`sphere_grid` nodes, optionally with
    trailing axes (e.g. radii). Keys are ``(l, m)``; for ``n = 2`` the branch
    ``m = l`` is the cosine and ``m = -l`` the sine.

    Raises
    ------
    AliasingError
        When re-synthesis misses the samples by more than ``tol`` relative,
        i.e. the field carries degrees above ``l_max``.
    """
    angles, w = sphere_grid(n, l_max)
    samples = np.asarray(samples, dtype=float)
    out = {}
    for l, m in _basis(n, l_max):
        y = spherical_harmonic_eval(SphericalHarmonic(l, m, n), *angles)
        out[(l, m)] = np.tensordot(w * y, samples, axes=(0, 0))
    back = harmonic_synthesize(out, n, l_max)
    scale = max(np.max(np.abs(samples)), 1e-300)
    if np.max(np.abs(back - samples)) > tol * scale:
        raise AliasingError(f"samples carry harmonics above degree {l_max}")
    return out


def harmonic_synthesize(coeffs: dict, n: int, l_max: int) -> np.ndarray:
    """Evaluate ``sum c_lm Y_lm`` on the :func:`sphere_grid` nodes."""
    angles, _ = sphere_grid(n, l_max)
    total = None
    for (l, m), c in coeffs.items():
        y = spherical_harmonic_eval(SphericalHarmonic(l, m, n), *angles)
        term = np.multiply.outer(y, np.asarray(c))
        total = term if total is None else total + term
    return total


def reduced_shift(u_l, r, l: int, growth_tol: float = 1e-3):
    """``v_l = r^-l u_l`` with the value at ``r = 0`` filled by even extrapolation.

    The three smallest positive radii must show ``u_l = O(r^l)``: the ratios
    ``u_l / r^l`` have to agree to ``max(growth_tol, r_3^2)`` relative,
    otherwise the profile is not of the required order.
    """
    u_l = np.asarray(u_l, dtype=float)
    r = np.asarray(r, dtype=float)
    if l == 0:
        return u_l.copy()
    pos = r > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(pos, u_l / np.where(pos, r, 1.0) ** l, np.nan)
    rp, vp = r[pos][:3], v[pos][:3]
    if rp.size < 3:
        raise ValueError("need three positive radii")
    if np.any(r[~pos] == 0) and abs(u_l[~pos][0]) > growth_tol * max(np.max(np.abs(u_l)), 1e-300):
        raise ValueError(f"profile does not vanish at the origin like r^{l}")
    # an even profile moves by O(r^2) over the probe; a lower order blows up like 1/r
    if np.ptp(vp) > max(growth_tol, rp[-1] ** 2) * max(np.max(np.abs(vp)), growth_tol):
        raise ValueError(f"profile is not O(r^{l}) near the origin")
    # even function of r: fit c0 + c2 r^2 through the two smallest radii
    c2 = (vp[1] - vp[0]) / (rp[1] ** 2 - rp[0] ** 2)
    v = np.where(pos, v, vp[0] - c2 * rp[0] ** 2)
    return v


def mu_split_residuals(v, dv, d2v, r, l: int, n: int, vertical_term=None):
    """Residuals of the degree-``l`` equation for ``u = r^l v`` and of the reduced one.

    Returns ``(res_u, r^l * res_v)``; they coincide exactly when
    ``l(l+n-2) = l(l-1) + l(n-1)``, which is what lets the angular term cancel.
    ``vertical_term`` is the ``(a v_t)_t / a`` contribution (zero by default).
    """
    r = np.asarray(r, dtype=float)
    vt = 0.0 if vertical_term is None else np.asarray(vertical_term, dtype=float)
    mu = l * (l + n - 2)
    rl = r**l
    u = rl * v
    du = l * r ** (l - 1) * v + rl * dv if l else dv
    d2u = (l * (l - 1) * r ** (l - 2) * v if l > 1 else 0.0) + (2 * l * r ** (l - 1) * dv if l else 0.0) + rl * d2v
    res_u = d2u + (n - 1) / r * du - mu * u / r**2 + rl * vt
    res_v = rl * (d2v + (2 * l + n - 1) / r * dv + vt)
    return res_u, res_v


# --------------------------------------------------------------------------
# energies


@dataclass
class EnergySample:
    """Energy at one radius and its parts.

    ``H = (kinetic_r - kinetic_t - potential) / 2`` with
    ``potential = V(r) u(r)^2``. ``tail_bound`` bounds the vertical
    integrals beyond the mesh and is reported separately.
    """

    r: float
    H: float
    kinetic_r: float
    kinetic_t: float
    potential: float
    tail_bound: float = 0.0


def _check_resolved(field: ExtensionField):
    s = _power_order(field.weight)
    if s is not None and field.t.size > 1 and field.t[1] > 1e-2:
        raise UnderResolvedError("first vertical cell too wide for the weight singularity")


def _vertical_parts(field: ExtensionField, i: int):
    """``int a v_r^2`` and ``int a v_t^2`` at radius index ``i``."""
    t = field.t
    A_cell = field.weight.cell_integrals(t, 1.0)
    B_cell = field.weight.cell_integrals(t, -1.0)
    vr = field.radial_derivative()[i]
    vr2 = 0.5 * (vr[1:] ** 2 + vr[:-1] ** 2)
    kin_r = float(np.sum(A_cell * vr2))
    dv = np.diff(field.values[i])
    kin_t = float(np.sum(dv * dv / B_cell))
    return kin_r, kin_t


def _tail_bound(field: ExtensionField, i: int) -> float:
    """Bound of ``int_T^inf a v_t^2`` from ``|v_t| <= C/t`` with ``C`` read off the last cells."""
    alpha = field.weight.alpha_hint
    if alpha is None or alpha >= 1:
        return math.inf
    t = field.t
    T = t[-1]
    tail = slice(-4, None)
    vt = np.gradient(field.values[i], t)[tail]
    C = float(np.max(np.abs(vt) * t[tail]))
    return C * C * T ** (alpha - 1.0) / (1.0 - alpha)


def _as_callable(V):
    if callable(V):
        return V
    return lambda r: np.full_like(np.asarray(r, dtype=float), float(V))


def energy_H(field: ExtensionField, V, s: float | None = None, r: float | None = None,
             index: int | None = None) -> EnergySample:
    """Energy ``H(r) = [int a (v_r^2 - v_t^2) dt - V(r) v(r,0)^2] / 2`` at one radius.

    Pass either the radius ``r`` (snapped to the nearest grid node) or the
    grid ``index``. ``s`` is accepted for symmetry with the weight label and
    checked against a power weight when both are given.
    """
    _check_resolved(field)
    if s is not None and field.weight.alpha_hint is not None:
        if abs(field.weight.alpha_hint - (1 - 2 * s)) > 1e-12:
            raise ValueError("s does not match the field's weight")
    if index is None:
        if r is None:
            raise ValueError("give r or index")
        index = int(np.argmin(np.abs(field.r - r)))
    kin_r, kin_t = _vertical_parts(field, index)
    rad = float(field.r[index])
    pot = float(_as_callable(V)(np.array(rad))) * float(field.trace[index]) ** 2
    H = 0.5 * (kin_r - kin_t - pot)
    return EnergySample(rad, H, kin_r, kin_t, pot, _tail_bound(field, index))


def energy_monotonicity_scan(field: ExtensionField, V, s: float | None = None, radii=None,
                             dV: Callable | None = None, tol_factor: float = 5e-3):
    """``H`` on a set of radii with ``dH/dr`` from finite differences.

    Returns a dict with ``rows`` as ``(r, H, dH/dr, predicted)`` at interior
    radii, where ``predicted = -(k/r) int a v_r^2 dt - V'(r) u^2 / 2`` is the
    closed-form right side, plus the tolerance ``tol_factor * max|H|`` and the
    boolean ``monotone``.
    """
    idx = np.arange(field.r.size) if radii is None else np.unique(
        [int(np.argmin(np.abs(field.r - x))) for x in radii])
    if idx.size < 3:
        raise ValueError("need at least three radii")
    samples = [energy_H(field, V, s, index=int(i)) for i in idx]
    rs = np.array([e.r for e in samples])
    H = np.array([e.H for e in samples])
    dH = np.gradient(H, rs, edge_order=2)
    Vd = dV or (lambda x: 0.0)
    rows = []
    for j in range(1, len(rs) - 1):
        pred = -(field.k / rs[j]) * samples[j].kinetic_r - 0.5 * float(Vd(rs[j])) * field.trace[idx[j]] ** 2
        rows.append((float(rs[j]), float(H[j]), float(dH[j]), float(pred)))
    tol = tol_factor * float(np.max(np.abs(H)))
    if rows and np.max(np.abs(np.diff(rs))) > 0.5:
        warnings.warn("radial spacing above 0.5: dH/dr estimates may be noisy", RuntimeWarning)
    monotone = all(row[2] <= tol for row in rows)
    return {"rows": rows, "tolerance": tol, "monotone": monotone, "samples": samples}


def weighted_energy_balance(field: ExtensionField, weight: WeightProfile | None = None,
                            l: int | None = None, n: int | None = None, c: float | None = None) -> dict:
    """Three-term energy identity for a solution of the reduced weighted problem.

    With the boundary relation ``lim a v_t = -c v`` (``c > 0``)::

        T1 = 1/2 int a (v_r(R,t)^2 + v_t(0,t)^2) dt
        T2 = int int (k/r) a v_r^2 dr dt
        T3 = -c v(0)^2 / 2

    and ``T1 + T2 + T3 = 0`` up to truncation at the outer radius.
    """
    weight = weight or field.weight
    if weight is not field.weight:
        raise ValueError("balance must use the field's own weight")
    l = field.l if l is None else l
    n = field.n if n is None else n
    s = _power_order(weight)
    if s is None and weight.alpha_hint is None:
        fit_ok = True
        try:
            from .bernstein import asymptotic_exponent_fit
            fit_ok = asymptotic_exponent_fit(weight).passed
        except ValueError:
            fit_ok = False
        if not fit_ok:
            raise UnderResolvedError("tail terms unresolved: weight is not asymptotically a power")
    if c is None:
        c = extension_constant(s) if s is not None else -field.profile.boundary_flux
    k = 2 * l + n - 1
    t = field.t
    A_cell = weight.cell_integrals(t, 1.0)
    vr = field.radial_derivative()
    vr2 = 0.5 * (vr[:, 1:] ** 2 + vr[:, :-1] ** 2)
    col = vr2 @ A_cell
    kin_t0 = float(np.sum(np.diff(field.values[0]) ** 2 / weight.cell_integrals(t, -1.0)))
    T1 = 0.5 * (float(col[-1]) + kin_t0)
    r = field.r
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(r > 0, k / np.where(r > 0, r, 1.0) * col, 0.0)
    from scipy.integrate import simpson
    T2 = float(simpson(integrand, x=r))
    T3 = -0.5 * c * float(field.trace[0]) ** 2
    terms = (T1, T2, T3)
    total = sum(terms)
    largest = max(abs(x) for x in terms)
    return {"T1": T1, "T2": T2, "T3": T3, "sum": total,
            "relative": abs(total) / largest if largest > 0 else 0.0, "c": c}
