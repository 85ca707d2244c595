"""Special functions and the bounded solutions of the classical Helmholtz equation.

Bessel functions of the first kind, modified Bessel functions of the second
kind, real orthonormal spherical harmonics on S^1 and S^2, and the separated
family

    u(r, theta) = c * r**((2 - n)/2) * J_{n/2 + l - 1}(r) * phi_{l,m}(theta)

of bounded solutions of ``-Laplace(u) = u`` in n >= 2 dimensions, together with
``A cos(x) + B sin(x)`` in one dimension.

Double precision evaluation of J and K is delegated to :mod:`scipy.special`.
The power series and the Hankel large-argument expansion are kept here as
independent oracles over the ranges where they are accurate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "BesselOrder",
    "ClassicalSolution",
    "SphericalHarmonic",
    "bessel_j",
    "bessel_j_series",
    "bessel_j_asymptotic",
    "bessel_ode_residual",
    "modified_bessel_k",
    "modified_bessel_k_integral",
    "classical_radial",
    "classical_solution_eval",
    "normalized_legendre",
    "spherical_harmonic_eval",
]


@dataclass(frozen=True)
class BesselOrder:
    nu: float

    def __post_init__(self):
        if not np.isfinite(self.nu) or self.nu < 0:
            raise ValueError(f"Bessel order must be finite and >= 0, got {self.nu}")


def _order(order) -> float:
    if isinstance(order, BesselOrder):
        return order.nu
    return BesselOrder(float(order)).nu


def bessel_j(order, r):
    """Bessel function of the first kind ``J_nu(r)`` for ``r >= 0``.

    Parameters
    ----------
    order : BesselOrder or float
        Non-negative order.
    r : float or array_like
        Non-negative, finite argument.

    Returns
    -------
    float or ndarray
    """
    nu = _order(order)
    r_arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r_arr)):
        raise ValueError("bessel_j argument must be finite")
    if np.any(r_arr < 0):
        raise ValueError("bessel_j argument must be >= 0")
    out = special.jv(nu, r_arr)
    return float(out) if out.ndim == 0 else out


def bessel_j_series(nu: float, r, terms: int = 200):
    """Power series ``sum_k (-1)^k (r/2)^(2k+nu) / (k! Gamma(k+nu+1))``.

    Accurate to roundoff for ``r`` up to roughly 8; beyond that cancellation
    between terms costs digits.
    """
    r = np.asarray(r, dtype=float)
    half = 0.5 * r
    q = -(half * half)
    term = np.power(half, nu) / special.gamma(nu + 1.0)
    total = np.array(term, dtype=float)
    for k in range(1, terms):
        term = term * q / (k * (k + nu))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return float(total) if total.ndim == 0 else total


def bessel_j_asymptotic(nu: float, r, terms: int = 30):
    """Hankel large-argument expansion of ``J_nu(r)``.

    The series is asymptotic; summation stops at the smallest term. Accurate to
    about ``exp(-2r)`` relative to the envelope, so use it for ``r >~ 25``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    mu = 4.0 * nu * nu
    omega = r - (0.5 * nu + 0.25) * np.pi
    p = np.ones_like(r)
    q = np.zeros_like(r)
    a = np.ones_like(r)
    last = np.full_like(r, np.inf)
    active = np.ones(r.shape, dtype=bool)
    for k in range(1, terms):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0 * r)
        grow = np.abs(a) > last
        active &= ~grow
        last = np.abs(a)
        contrib = np.where(active, a, 0.0)
        m = k % 4
        if m == 1:
            q += contrib
        elif m == 2:
            p -= contrib
        elif m == 3:
            q -= contrib
        else:
            p += contrib
    out = np.sqrt(2.0 / (np.pi * r)) * (p * np.cos(omega) - q * np.sin(omega))
    return float(out[0]) if out.size == 1 else out


def bessel_ode_residual(order, r: float, h: float = 4e-3) -> float:
    """``|J'' + J'/r + (1 - nu^2/r^2) J|`` from centred differences.

    Derivatives use one Richardson step over ``h`` and ``h/2`` so the
    truncation error is fourth order; the default step keeps the residual of
    the exact function below 1e-8 on ``[0.1, 50]``.
    """
    nu = _order(order)
    if not np.isfinite(r) or r <= 0:
        raise ValueError("bessel_ode_residual requires r > 0")
    h = min(h, 0.25 * r)

    def diffs(step):
        jp = special.jv(nu, r + step)
        jm = special.jv(nu, r - step)
        j0 = special.jv(nu, r)
        return (jp - 2.0 * j0 + jm) / step**2, (jp - jm) / (2.0 * step)

    d2h, d1h = diffs(h)
    d2q, d1q = diffs(0.5 * h)
    d2 = (4.0 * d2q - d2h) / 3.0
    d1 = (4.0 * d1q - d1h) / 3.0
    j0 = special.jv(nu, r)
    return float(abs(d2 + d1 / r + (1.0 - nu * nu / (r * r)) * j0))


def modified_bessel_k(s: float, t):
    """Modified Bessel function of the second kind ``K_s(t)``, ``t > 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr <= 0):
        raise ValueError("modified_bessel_k requires finite t > 0")
    out = special.kv(s, t_arr)
    return float(out) if out.ndim == 0 else out


def modified_bessel_k_integral(s: float, t: float) -> float:
    """``K_s(t) = int_0^inf exp(-t cosh u) cosh(s u) du`` by adaptive quadrature."""
    from scipy.integrate import quad

    # integrand below 1e-300 once t*cosh(u) > 690
    upper = math.acosh(max(1.0, 700.0 / t)) + 1.0
    val, _ = quad(lambda u: math.exp(-t * math.cosh(u)) * math.cosh(s * u), 0.0, upper,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


# --------------------------------------------------------------------------
# spherical harmonics


@dataclass(frozen=True)
class SphericalHarmonic:
    """Real orthonormal spherical harmonic of degree ``l`` on S^{n-1}.

    For ``n = 2`` the sign of ``m`` selects the branch: ``m >= 0`` is
    ``cos(l theta)``, ``m < 0`` is ``sin(l theta)``. For ``n = 3`` the usual real
    basis ``|m| <= l`` is used (cosine for ``m > 0``, sine for ``m < 0``).
    """

    degree: int
    index: int = 0
    dim: int = 2

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise NotImplementedError(f"spherical harmonics only for n in (2, 3), got {self.dim}")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.dim == 3 and abs(self.index) > self.degree:
            raise ValueError("|m| must not exceed l")

    @property
    def eigenvalue(self) -> int:
        return self.degree * (self.degree + self.dim - 2)


def normalized_legendre(l: int, m: int, x):
    """Associated Legendre function normalised so that ``Y_l^m`` has unit L2 norm on S^2.

    Returns ``sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(x)`` without the
    Condon-Shortley phase, for ``0 <= m <= l``. Uses the standard three-term
    recurrence in ``l``, which is stable for these normalised values.
    """
    if not 0 <= m <= l:
        raise ValueError("need 0 <= m <= l")
    x = np.asarray(x, dtype=float)
    sin_t = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    pmm = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for i in range(1, m + 1):
        pmm = pmm * math.sqrt((2 * i + 1) / (2.0 * i)) * sin_t
    if l == m:
        return pmm
    p_prev = pmm
    p_cur = math.sqrt(2 * m + 3) * x * pmm
    for ll in range(m + 2, l + 1):
        a = math.sqrt((4.0 * ll * ll - 1.0) / (ll * ll - m * m))
        b = math.sqrt(((ll - 1.0) ** 2 - m * m) / (4.0 * (ll - 1.0) ** 2 - 1.0))
        p_prev, p_cur = p_cur, a * (x * p_cur - b * p_prev)
    return p_cur


def spherical_harmonic_eval(h: SphericalHarmonic, theta, phi=None):
    """Evaluate a real orthonormal harmonic.

    ``theta`` is the circle angle for ``n = 2``; for ``n = 3`` it is the polar
    angle and ``phi`` the azimuth.
    """
    theta = np.asarray(theta, dtype=float)
    l, m = h.degree, h.index
    if h.dim == 2:
        if l == 0:
            return np.full_like(theta, 1.0 / math.sqrt(2.0 * math.pi)) if theta.ndim else 1.0 / math.sqrt(2.0 * math.pi)
        trig = np.cos if m >= 0 else np.sin
        return trig(l * theta) / math.sqrt(math.pi)
    if phi is None:
        phi = np.zeros_like(theta)
    phi = np.asarray(phi, dtype=float)
    p = normalized_legendre(l, abs(m), np.cos(theta))
    if m == 0:
        return p
    if m > 0:
        return math.sqrt(2.0) * p * np.cos(m * phi)
    return math.sqrt(2.0) * p * np.sin(-m * phi)


# --------------------------------------------------------------------------
# classical Helmholtz solutions


def classical_radial(n: int, l: int, r):
    """Radial factor ``r^((2-n)/2) J_{n/2+l-1}(r)`` with its limit at ``r = 0``."""
    r = np.asarray(r, dtype=float)
    nu = 0.5 * n + l - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.power(r, 0.5 * (2 - n)) * special.jv(nu, r)
    at_zero = 1.0 / (2.0 ** nu * math.gamma(nu + 1.0)) if l == 0 else 0.0
    val = np.where(r == 0, at_zero, val)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ClassicalSolution:
    """One term of the separated family of bounded Helmholtz solutions.

    ``coefficient`` is the free scalar multiplying the term; for ``dim == 1``
    the solution is ``A cos(x) + B sin(x)`` and ``l``/``m`` are ignored.
    """

    dim: int
    harmonic_degree: int = 0
    harmonic_index: int = 0
    coefficients: tuple[float, float] = (1.0, 0.0)
    coefficient: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.harmonic_degree < 0:
            raise ValueError("harmonic degree must be >= 0")

    @property
    def order(self) -> float:
        return 0.5 * self.dim + self.harmonic_degree - 1.0

    def radial(self, r):
        return self.coefficient * classical_radial(self.dim, self.harmonic_degree, r)

    def reduced(self, r):
        """``r^-l`` times the radial factor, with the finite limit at the origin."""
        l = self.harmonic_degree
        nu = self.order
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.radial(r) / np.power(r, l)
        lim = self.coefficient / (2.0 ** nu * math.gamma(nu + 1.0))
        val = np.where(r == 0, lim, val)
        return float(val) if val.ndim == 0 else val


def classical_solution_eval(sol: ClassicalSolution, point):
    """Evaluate a classical solution at Cartesian ``point`` (last axis = coordinates)."""
    p = np.asarray(point, dtype=float)
    if sol.dim == 1:
        x = p[..., 0] if p.ndim and p.shape[-1:] == (1,) else p
        a, b = sol.coefficients
        return a * np.cos(x) + b * np.sin(x)
    if p.shape[-1] != sol.dim:
        raise ValueError(f"point has {p.shape[-1]} coordinates, solution lives in {sol.dim}")
    r = np.linalg.norm(p, axis=-1)
    h = SphericalHarmonic(sol.harmonic_degree, sol.harmonic_index, sol.dim)
    if sol.dim == 2:
        ang = spherical_harmonic_eval(h, np.arctan2(p[..., 1], p[..., 0]))
    elif sol.dim == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            polar = np.arccos(np.clip(np.where(r > 0, p[..., 2] / np.where(r > 0, r, 1.0), 1.0), -1, 1))
        ang = spherical_harmonic_eval(h, polar, np.arctan2(p[..., 1], p[..., 0]))
    else:
        raise NotImplementedError("classical solutions are only tabulated for n <= 3")
    return sol.radial(r) * ang
