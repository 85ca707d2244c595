import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nonlocal_helmholtz.specfun import (BesselOrder, ClassicalSolution, SphericalHarmonic, bessel_j,
                                        bessel_j_asymptotic, bessel_j_series, bessel_ode_residual,
                                        classical_radial, classical_solution_eval, modified_bessel_k,
                                        modified_bessel_k_integral, normalized_legendre,
                                        spherical_harmonic_eval)


def test_bessel_known_values():
    # first zero of J0 and tabulated J0(1)
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-14
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976865579666, abs=1e-15)
    assert bessel_j(BesselOrder(0.5), math.pi / 2) == pytest.approx(math.sqrt(2 / (math.pi * math.pi / 2)), abs=1e-14)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 1.5, 2.5, 3.0])
def test_series_matches_library_small_argument(nu):
    r = np.linspace(0.0, 8.0, 81)
    assert np.max(np.abs(bessel_j_series(nu, r) - bessel_j(nu, r))) < 1e-13


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.0])
def test_asymptotic_matches_library_large_argument(nu):
    r = np.linspace(30.0, 200.0, 50)
    assert np.max(np.abs(bessel_j_asymptotic(nu, r) - bessel_j(nu, r))) < 1e-12


def test_half_integer_closed_form():
    r = np.linspace(0.1, 40, 200)
    exact = np.sqrt(2 / (np.pi * r)) * np.sin(r)
    assert np.max(np.abs(bessel_j(0.5, r) - exact)) < 1e-14


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.0, 4.0), r=st.floats(0.5, 50.0))
def test_bessel_ode_residual_small(nu, r):
    assert bessel_ode_residual(nu, r) < 1e-8


def test_bessel_rejects_bad_input():
    with pytest.raises(ValueError):
        bessel_j(-1.0, 1.0)
    with pytest.raises(ValueError):
        bessel_j(0, -1.0)
    with pytest.raises(ValueError):
        bessel_j(0, np.inf)


@pytest.mark.parametrize("s,t", [(0.25, 0.3), (0.5, 1.0), (0.75, 5.0), (0.1, 20.0)])
def test_modified_bessel_k_integral_representation(s, t):
    assert modified_bessel_k(s, t) == pytest.approx(modified_bessel_k_integral(s, t), rel=1e-12)


def test_modified_bessel_k_half_order():
    t = np.linspace(0.1, 10, 20)
    assert np.allclose(modified_bessel_k(0.5, t), np.sqrt(np.pi / (2 * t)) * np.exp(-t), rtol=1e-13)


def test_modified_bessel_k_rejects_nonpositive():
    with pytest.raises(ValueError):
        modified_bessel_k(0.5, 0.0)


def test_circle_harmonics_orthonormal():
    theta = 2 * np.pi * np.arange(64) / 64
    hs = [SphericalHarmonic(0, 0, 2)] + [SphericalHarmonic(l, m, 2) for l in (1, 2, 3) for m in (l, -l)]
    G = np.array([[np.sum(spherical_harmonic_eval(a, theta) * spherical_harmonic_eval(b, theta)) * 2 * np.pi / 64
                   for b in hs] for a in hs])
    assert np.allclose(G, np.eye(len(hs)), atol=1e-13)


def test_sphere_harmonics_orthonormal_by_quadrature():
    x, w = np.polynomial.legendre.leggauss(12)
    phi = 2 * np.pi * np.arange(24) / 24
    P, F = np.meshgrid(np.arccos(x), phi, indexing="ij")
    W = np.outer(w, np.full(24, 2 * np.pi / 24))
    hs = [SphericalHarmonic(l, m, 3) for l in range(4) for m in range(-l, l + 1)]
    vals = [spherical_harmonic_eval(h, P, F) for h in hs]
    G = np.array([[np.sum(a * b * W) for b in vals] for a in vals])
    assert np.allclose(G, np.eye(len(hs)), atol=1e-13)


def test_normalized_legendre_against_closed_form():
    x = np.linspace(-1, 1, 21)
    # Y_1^0 = sqrt(3/(4 pi)) cos(theta)
    assert np.allclose(normalized_legendre(1, 0, x), math.sqrt(3 / (4 * math.pi)) * x, atol=1e-15)
    # P_2^0 normalised
    p20 = math.sqrt(5 / (4 * math.pi)) * 0.5 * (3 * x * x - 1)
    assert np.allclose(normalized_legendre(2, 0, x), p20, atol=1e-15)


def test_harmonic_argument_validation():
    with pytest.raises(NotImplementedError):
        SphericalHarmonic(1, 0, 4)
    with pytest.raises(ValueError):
        SphericalHarmonic(1, 2, 3)


def test_classical_radial_origin_limit():
    assert classical_radial(2, 0, 0.0) == 1.0
    assert classical_radial(3, 0, 0.0) == pytest.approx(math.sqrt(2 / math.pi))
    assert classical_radial(3, 0, 1e-8) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)
    assert classical_radial(2, 1, 0.0) == 0.0


def _fd_laplacian(f, p, h=1e-3):
    total = -2 * p.shape[-1] * f(p)
    for i in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[i] = h
        total = total + f(p + e) + f(p - e)
    return total / h**2


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([2, 3]), l=st.integers(0, 3), seed=st.integers(0, 2**31))
def test_classical_solutions_solve_helmholtz(n, l, seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(-l, l + 1)) if n == 3 else (l if rng.random() < 0.5 else -l)
    sol = ClassicalSolution(n, l, m)
    p = rng.uniform(0.5, 4.0, size=n) * rng.choice([-1, 1], size=n)
    f = lambda q: classical_solution_eval(sol, q)
    assert abs(-_fd_laplacian(f, p) - f(p)) < 2e-5


def test_one_dimensional_solution():
    sol = ClassicalSolution(1, coefficients=(1.0, 0.5))
    x = np.linspace(-3, 3, 7)
    assert np.allclose(classical_solution_eval(sol, x), np.cos(x) + 0.5 * np.sin(x))


def test_reduced_trace_limit_matches_series():
    sol = ClassicalSolution(3, 2)
    nu = sol.order
    assert sol.reduced(0.0) == pytest.approx(1 / (2**nu * math.gamma(nu + 1)))
    assert sol.reduced(1e-4) == pytest.approx(sol.reduced(0.0), rel=1e-7)


def test_bessel_integral_representation_oracle():
    # J_0(r) = (1/pi) int_0^pi cos(r sin u) du
    for r in (0.5, 3.0, 11.0):
        val = integrate.quad(lambda u: math.cos(r * math.sin(u)), 0, math.pi)[0] / math.pi
        assert bessel_j(0, r) == pytest.approx(val, abs=1e-13)
