import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from nonlocal_helmholtz.bernstein import WeightProfile
from nonlocal_helmholtz.extension import (AliasingError, ExtensionGeometry, MeshTooCoarseError, UnderResolvedError,
                                          energy_H, energy_monotonicity_scan, extension_constant,
                                          harmonic_decompose, harmonic_synthesize, mu_split_residuals,
                                          neumann_eigen_error, neumann_trace, profile_closed_form,
                                          profile_ode_residual, reduced_shift, separated_field, separation_error,
                                          solve_profile_phi, solve_weight_profile, solve_weighted_extension,
                                          sphere_grid, vertical_mesh, weighted_energy_balance)
from nonlocal_helmholtz.specfun import ClassicalSolution, SphericalHarmonic, modified_bessel_k_integral, \
    spherical_harmonic_eval


def test_extension_constant_values():
    assert extension_constant(0.5) == pytest.approx(1.0)
    # 2^(1-2s) Gamma(1-s)/Gamma(s) at s = 1/4
    assert extension_constant(0.25) == pytest.approx(math.sqrt(2) * math.gamma(0.75) / math.gamma(0.25))


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_profile_closed_form_against_integral_representation(s):
    for t in (0.1, 1.0, 4.0):
        phi, _ = profile_closed_form(s, t)
        ref = 2 ** (1 - s) / math.gamma(s) * t**s * modified_bessel_k_integral(s, t)
        assert float(phi) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_profile_solves_ode(s):
    t = np.geomspace(1e-3, 20, 50)
    assert np.max(profile_ode_residual(s, t)) < 1e-6
    prof = solve_profile_phi(s)
    assert prof.phi[0] == 1.0 and np.all(np.diff(prof.phi) <= 1e-14)


def test_profile_ivp_oracle():
    # integrate the ODE backwards from a point where the closed form is tiny
    s = 0.75
    T = 12.0
    phi_T, dphi_T = profile_closed_form(s, T)
    rhs = lambda t, y: [y[1], y[0] - (1 - 2 * s) / t * y[1]]
    sol = integrate.solve_ivp(rhs, (T, 0.5), [float(phi_T), float(dphi_T)], method="DOP853",
                              rtol=1e-12, atol=1e-16, dense_output=True)
    t = np.linspace(0.5, 5, 10)
    assert np.allclose(sol.sol(t)[0], profile_closed_form(s, t)[0], rtol=1e-7)


def test_profile_mesh_guard():
    with pytest.raises(MeshTooCoarseError):
        solve_profile_phi(0.5, mesh=np.linspace(0, 20, 10))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_numerical_weight_profile_matches_closed_form(s):
    prof = solve_weight_profile(WeightProfile.fractional(s))
    exact, _ = profile_closed_form(s, prof.t)
    assert np.max(np.abs(prof.phi - exact)) < 1e-4
    assert prof.boundary_flux == pytest.approx(-extension_constant(s), rel=2e-3)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_neumann_trace_of_closed_form(s):
    mesh = vertical_mesh(s)
    prof = solve_profile_phi(s, mesh)
    assert neumann_trace(prof, s) == pytest.approx(-extension_constant(s), rel=1e-8)


@pytest.mark.parametrize("n,l,s", [(2, 1, 0.25), (3, 2, 0.75)])
def test_extension_neumann_relation(n, l, s):
    sol = ClassicalSolution(n, l)
    fld = solve_weighted_extension(sol.reduced, WeightProfile.fractional(s), ExtensionGeometry(), l=l, n=n)
    assert neumann_eigen_error(fld) <= 2e-3
    assert separation_error(fld) <= 1e-4


def test_extension_generic_weight_calibrates_own_constant():
    w = WeightProfile(lambda t: np.power(t, 0.3), label="t^0.3 (no hint)")
    fld = solve_weighted_extension(ClassicalSolution(2, 0).reduced, w, ExtensionGeometry(), l=0, n=2)
    assert neumann_eigen_error(fld) <= 2e-3


def test_extension_zero_trace():
    fld = solve_weighted_extension(lambda r: np.zeros_like(r), WeightProfile.fractional(0.5),
                                   ExtensionGeometry(r_max=10.0), l=0, n=2)
    assert np.all(fld.values == 0)
    assert neumann_eigen_error(fld) == 0.0


def test_extension_window_lateral_condition():
    sol = ClassicalSolution(2, 0)
    geo = ExtensionGeometry(lateral="window")
    fld = solve_weighted_extension(sol.reduced, WeightProfile.fractional(0.5), geo, l=0, n=2)
    assert neumann_eigen_error(fld, interior=0.5) <= 2e-3


def test_extension_negative_control_cos2x():
    fld = solve_weighted_extension(lambda r: np.cos(2 * r), WeightProfile.fractional(0.5),
                                   ExtensionGeometry(r_max=20.0), l=0, n=1)
    assert neumann_eigen_error(fld) >= 0.5


def test_separated_field_flux_matches_solve():
    sol = ClassicalSolution(2, 1)
    w = WeightProfile.fractional(0.5)
    fld = solve_weighted_extension(sol.reduced, w, ExtensionGeometry(r_max=20.0), l=1, n=2)
    sep = separated_field(sol, w, fld.r, fld.t)
    assert np.max(np.abs(sep.values - fld.values)) < 1e-4


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([2, 3]), l_max=st.integers(0, 4), seed=st.integers(0, 2**31))
def test_harmonic_round_trip(n, l_max, seed):
    rng = np.random.default_rng(seed)
    angles, _ = sphere_grid(n, l_max)
    keys = ([(0, 0)] + [(l, m) for l in range(1, l_max + 1) for m in (l, -l)]) if n == 2 else \
        [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]
    coeffs = {k: rng.normal(size=3) for k in keys}
    samples = harmonic_synthesize(coeffs, n, l_max)
    back = harmonic_decompose(samples, n, l_max)
    for k in keys:
        assert np.allclose(back[k], coeffs[k], atol=1e-12)


def test_harmonic_aliasing_detected():
    angles, _ = sphere_grid(2, 2)
    samples = spherical_harmonic_eval(SphericalHarmonic(5, 5, 2), *angles)
    with pytest.raises(AliasingError):
        harmonic_decompose(samples, 2, 2)


def test_reduced_shift():
    r = np.linspace(0, 3, 31)
    v = ClassicalSolution(3, 2).reduced(r)
    u = r**2 * v
    assert np.allclose(reduced_shift(u, r, 2), v, atol=1e-6)
    with pytest.raises(ValueError):
        reduced_shift(r, r, 2)


@settings(max_examples=40, deadline=None)
@given(l=st.integers(0, 5), n=st.sampled_from([2, 3]), seed=st.integers(0, 2**31))
def test_mu_split_identity(l, n, seed):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.1, 5.0, size=8)
    v, dv, d2v = rng.normal(size=(3, 8))
    res_u, res_v = mu_split_residuals(v, dv, d2v, r, l, n)
    assert np.allclose(res_u, res_v, rtol=1e-10, atol=1e-10 * np.max(np.abs(res_v)))


def test_energy_closed_form_half():
    sol = ClassicalSolution(2, 0)
    r = np.linspace(0, 30, 601)
    fld = separated_field(sol, WeightProfile.fractional(0.5), r)
    for rr in (0.0, 5.0, 17.3):
        e = energy_H(fld, -1.0, 0.5, r=rr)
        exact = 0.25 * (special.j0(e.r) ** 2 + special.j1(e.r) ** 2)
        assert e.H == pytest.approx(exact, abs=2e-5)


def test_energy_scan_predicted_slope():
    sol = ClassicalSolution(2, 1)
    r = np.linspace(0, 40, 801)
    fld = separated_field(sol, WeightProfile.fractional(0.5), r)
    scan = energy_monotonicity_scan(fld, -1.0, 0.5)
    assert scan["monotone"]
    rows = np.array(scan["rows"])
    assert np.max(np.abs(rows[:, 2] - rows[:, 3])) <= 1e-3 * np.max(np.abs(rows[:, 1]))


def test_energy_under_resolved_mesh():
    fld = separated_field(ClassicalSolution(2, 0), WeightProfile.fractional(0.5), np.linspace(0, 5, 51),
                          mesh=np.linspace(0, 20, 401))
    with pytest.raises(UnderResolvedError):
        energy_H(fld, -1.0, index=3)


def test_energy_scan_l3_steepening_recorded():
    fld = separated_field(ClassicalSolution(2, 3), WeightProfile.fractional(0.5), np.linspace(0, 40, 801))
    scan = energy_monotonicity_scan(fld, -1.0, 0.5)
    assert scan["monotone"]


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("l", [0, 1])
def test_weighted_energy_balance(s, l):
    fld = separated_field(ClassicalSolution(2, l), WeightProfile.fractional(s), np.linspace(0, 200, 4001))
    bal = weighted_energy_balance(fld)
    assert bal["relative"] <= 5e-2
    assert bal["T3"] < 0 < bal["T1"]
