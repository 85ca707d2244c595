import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from nonlocal_helmholtz.quadrature import (NonSmoothError, PointwiseFunction, QuadratureError, QuadratureParams,
                                           barrier_sign_check, barrier_values, calibrate_constant,
                                           fractional_laplacian, l2s_fraclap, normalization_constant, pv_fraclap,
                                           semigroup_check, spectral_reference, sphere_area)

GAUSS = PointwiseFunction.from_1d(lambda x: np.exp(-x * x), sup_norm=1.0,
                                  laplacian=lambda x: (4 * x * x - 2) * np.exp(-x * x),
                                  bilaplacian=lambda x: (16 * x**4 - 48 * x * x + 12) * np.exp(-x * x))
FAR = QuadratureParams(outer_radius=50.0)


def gauss_fraclap(x, s, n=1):
    """Closed form of the fractional Laplacian of ``exp(-|x|^2)`` in ``n`` dimensions."""
    return 4**s * special.gamma(0.5 * n + s) / special.gamma(0.5 * n) * special.hyp1f1(0.5 * n + s, 0.5 * n, -x * x)


def test_normalization_constant_values():
    assert normalization_constant(1, 0.5) == pytest.approx(1 / math.pi)
    # n = 3, s = 1/2: Gamma(2) / (pi^2) * 2 / (2 sqrt(pi)) * sqrt(pi)
    assert normalization_constant(3, 0.5) == pytest.approx(1 / math.pi**2)
    with pytest.raises(ValueError):
        normalization_constant(4, 0.5)
    with pytest.raises(ValueError):
        normalization_constant(1, 1.0)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("s", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_pv_cos_mix(s):
    u = PointwiseFunction.from_1d(lambda x: np.cos(x) + 0.5 * np.sin(x), sup_norm=1.2)
    for x in (-2.0, 0.3, 1.7):
        assert pv_fraclap(u, [x], s) == pytest.approx(math.cos(x) + 0.5 * math.sin(x), abs=5e-3)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_pv_gaussian_against_closed_form(s):
    for x in (0.0, 0.7, 2.0):
        assert pv_fraclap(GAUSS, [x], s) == pytest.approx(gauss_fraclap(x, s), abs=1e-6)


def test_pv_matches_spectral_reference():
    pts = np.array([-1.0, 0.0, 0.5])
    ref = spectral_reference(lambda x: np.exp(-x * x), pts, 0.4)
    got = np.array([pv_fraclap(GAUSS, [x], 0.4) for x in pts])
    # the periodic reference carries the image sum of the kernel tail, O(L^(-1-2s))
    assert np.allclose(got, ref, atol=1e-3)
    exact = gauss_fraclap(pts, 0.4)
    assert np.max(np.abs(got - exact)) < np.max(np.abs(ref - exact))


@pytest.mark.parametrize("n", [2, 3])
def test_pv_gaussian_higher_dimensions(n):
    u = PointwiseFunction(lambda p: np.exp(-np.sum(p * p, axis=-1)), dim=n, sup_norm=1.0)
    assert pv_fraclap(u, np.zeros(n), 0.5, FAR) == pytest.approx(gauss_fraclap(0.0, 0.5, n), rel=1e-4)


def test_pv_at_one_is_negative_laplacian():
    assert pv_fraclap(GAUSS, [0.5], 1.0) == pytest.approx(-(4 * 0.25 - 2) * math.exp(-0.25))


def test_pv_tail_bound_shrinks_with_outer_radius():
    _, near = pv_fraclap(GAUSS, [0.0], 0.5, QuadratureParams(outer_radius=10.0), return_bound=True)
    _, far = pv_fraclap(GAUSS, [0.0], 0.5, QuadratureParams(outer_radius=1e3), return_bound=True)
    assert far < near


def test_non_smooth_rejected():
    u = PointwiseFunction.from_1d(np.abs, smooth=False)
    with pytest.raises(NonSmoothError):
        pv_fraclap(u, [0.0], 0.5)
    with pytest.raises(ValueError):
        pv_fraclap(GAUSS, [0.0, 1.0], 0.5)


@pytest.mark.parametrize("s", [1.2, 1.5, 1.8, 2.0])
def test_l2s_plane_wave_and_gaussian(s):
    u = PointwiseFunction.from_1d(np.cos, sup_norm=1.0, bilaplacian=np.cos)
    assert l2s_fraclap(u, [0.4], s) == pytest.approx(math.cos(0.4), abs=1e-6)
    assert l2s_fraclap(GAUSS, [0.3], s) == pytest.approx(gauss_fraclap(0.3, s), abs=2e-4)


@pytest.mark.parametrize("s", [1.2, 1.35, 1.7])
def test_calibrated_constant_matches_analytic(s):
    # int_0^inf (1 - cos y)^2 y^(-1-b) dy = -Gamma(-b) cos(pi b/2) (2 - 2^(b-1)) for 2 < b < 4,
    # continued from int_0^inf (1 - cos a y) y^(-1-b) dy = -a^b Gamma(-b) cos(pi b/2)
    b = 2 * s
    one_sided = -math.gamma(-b) * math.cos(0.5 * math.pi * b) * (2 - 2 ** (b - 1))
    assert calibrate_constant(1, s) == pytest.approx(1 / (8 * one_sided), rel=1e-6)


def test_fractional_laplacian_dispatch():
    assert fractional_laplacian(GAUSS, [0.0], 0.5) == pytest.approx(pv_fraclap(GAUSS, [0.0], 0.5))
    assert fractional_laplacian(GAUSS, [0.0], 1.5) == pytest.approx(l2s_fraclap(GAUSS, [0.0], 1.5))


@pytest.mark.parametrize("s", [1.2, 1.5, 2.0])
def test_semigroup_check_gaussian(s):
    assert semigroup_check(GAUSS, s) <= 2e-2


def test_barrier_sign_check():
    pts = np.linspace(-20, 20, 9)
    assert barrier_sign_check(1.0, 0.3, 1.5, pts)
    vals = barrier_values(1.0, 0.3, 1.5, pts)
    # w itself dominates for large |x|
    assert np.all(vals > 1.0)
    with pytest.raises(QuadratureError):
        barrier_values(1.0, 0.8, 1.5, pts)


@settings(max_examples=10, deadline=None)
@given(A=st.floats(-2, 2), B=st.floats(-2, 2), x=st.floats(-3, 3), s=st.floats(0.1, 0.9))
def test_pv_linear_in_field(A, B, x, s):
    u = PointwiseFunction.from_1d(lambda y: A * np.cos(y) + B * np.sin(y), sup_norm=abs(A) + abs(B) + 1e-12)
    assert pv_fraclap(u, [x], s) == pytest.approx(A * math.cos(x) + B * math.sin(x), abs=5e-3 * (abs(A) + abs(B)))
