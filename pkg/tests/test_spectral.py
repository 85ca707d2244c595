import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_helmholtz.spectral import (GridFunction, MultiplierSpec, ZeroFieldError, apply_multiplier,
                                         fractional_residual, polyharmonic_residual, semigroup_defect,
                                         spectrum_localization)

L = 16 * math.pi


def grid(f, n=64, dim=1):
    return GridFunction.from_function(f, dim=dim, n=n, extent=L)


def test_cos_half_power_default_grid():
    u = GridFunction.from_function(np.cos)
    assert u.n == 4096
    out = apply_multiplier(u, MultiplierSpec.fractional(0.5))
    assert np.max(np.abs(out.values - u.values)) <= 1e-12


def test_constant_maps_to_zero():
    u = grid(lambda x: np.ones_like(x))
    assert np.max(np.abs(apply_multiplier(u, MultiplierSpec.fractional(0.7)).values)) < 1e-14


def test_cos2x_multiplier_value():
    u = grid(lambda x: np.cos(2 * x))
    out = apply_multiplier(u, MultiplierSpec.fractional(0.75))
    assert np.allclose(out.values, 2**1.5 * u.values, atol=1e-12)
    assert fractional_residual(u, 0.5) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s", [0.3, 1.5])
def test_fractional_residual_examples(s):
    assert fractional_residual(grid(lambda x: np.sin(x) + 0.5 * np.cos(x)), s) <= 1e-12


def test_fractional_residual_roundoff_grows_with_top_frequency():
    # same band-limited field; the finer grid only adds amplified roundoff
    f = lambda x: np.sin(x) + 0.5 * np.cos(x)
    coarse = fractional_residual(grid(f, 64), 1.5)
    fine = fractional_residual(GridFunction.from_function(f), 1.5)
    assert coarse <= 1e-12 < fine


@pytest.mark.parametrize("m,f", [(3, np.cos), (5, lambda x: np.cos(x) + np.sin(x))])
def test_polyharmonic_examples(m, f):
    assert polyharmonic_residual(grid(f), m) <= 1e-12


def test_polyharmonic_constant_residual_one():
    assert polyharmonic_residual(grid(lambda x: np.full_like(x, 3.0)), 2) == pytest.approx(1.0)


def test_zero_field_raises():
    with pytest.raises(ZeroFieldError):
        fractional_residual(grid(np.zeros_like), 0.5)
    with pytest.raises(ZeroFieldError):
        spectrum_localization(grid(np.zeros_like), 0.1)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        GridFunction(np.zeros(100))
    with pytest.raises(ValueError):
        MultiplierSpec.fractional(2.5)
    with pytest.raises(ValueError):
        MultiplierSpec.polyharmonic(1.5)
    with pytest.raises(ValueError):
        semigroup_defect(grid(np.cos), 0.8)


def test_spectrum_localization_examples():
    assert spectrum_localization(grid(np.cos), 0.1) == pytest.approx(1.0)
    assert spectrum_localization(grid(lambda x: np.cos(2 * x)), 0.1) == pytest.approx(0.0, abs=1e-25)
    u = grid(lambda x: np.cos(x) + 0.1 * np.cos(3 * x), 256)
    assert spectrum_localization(u, 0.1) == pytest.approx(1 / 1.01, rel=1e-12)


def test_semigroup_examples():
    assert semigroup_defect(grid(np.cos), 1.5) <= 1e-12
    gauss = GridFunction.from_function(lambda x: np.exp(-x * x))
    assert semigroup_defect(gauss, 2.0) <= 1e-10


def _random_field(seed, n=64, kmax=8, dim=1):
    rng = np.random.default_rng(seed)
    u = GridFunction(np.zeros((n,) * dim), L)
    coords = u.coords()
    vals = np.zeros_like(coords[0])
    for _ in range(4):
        k = rng.integers(-kmax, kmax + 1, size=dim) / 16.0
        phase = sum(ki * c for ki, c in zip(k, coords))
        vals += rng.normal() * np.cos(phase + rng.uniform(0, 2 * np.pi))
    return u.like(vals)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2]),
       kx=st.integers(-16, 16), ky=st.integers(-16, 16), s=st.floats(0.05, 2.0))
def test_lattice_modes_are_eigenfunctions(seed, dim, kx, ky, s):
    u = GridFunction(np.zeros((32,) * dim), L)
    c = u.coords()
    k = np.array([kx, ky][:dim]) / 16.0
    e = u.like(np.cos(sum(ki * ci for ki, ci in zip(k, c))))
    out = apply_multiplier(e, MultiplierSpec.fractional(s))
    lam = float(k @ k)
    assert np.max(np.abs(out.values - lam**s * e.values)) <= 1e-12 * max(1.0, lam**s)


@settings(max_examples=30, deadline=None)
@given(a=st.integers(0, 2**31), b=st.integers(0, 2**31), alpha=st.floats(-3, 3), beta=st.floats(-3, 3),
       s=st.floats(0.05, 2.0))
def test_linearity(a, b, alpha, beta, s):
    u, v = _random_field(a), _random_field(b)
    spec = MultiplierSpec.fractional(s)
    lhs = apply_multiplier(u.like(alpha * u.values + beta * v.values), spec).values
    rhs = alpha * apply_multiplier(u, spec).values + beta * apply_multiplier(v, spec).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.05, 1.0), b=st.floats(0.05, 1.0), dim=st.sampled_from([1, 2]))
def test_symbol_composition(seed, a, b, dim):
    u = _random_field(seed, n=32, dim=dim)
    twice = apply_multiplier(apply_multiplier(u, MultiplierSpec.power(a)), MultiplierSpec.power(b))
    once = apply_multiplier(u, MultiplierSpec.power(a + b))
    assert np.max(np.abs(twice.values - once.values)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.sampled_from([2, 3, 4]), s=st.floats(0.05, 2.0))
def test_scaling_law(seed, lam, s):
    rng = np.random.default_rng(seed)
    ks = rng.integers(-4, 5, size=3) / 16.0
    amps = rng.normal(size=3)
    f = lambda x: sum(A * np.cos(k * x + 0.3) for A, k in zip(amps, ks))
    g = lambda x: f(lam * x)
    Lu = apply_multiplier(grid(f, 128), MultiplierSpec.fractional(s))
    Lg = apply_multiplier(grid(g, 128), MultiplierSpec.fractional(s))
    # (Lu)(lam x) on grid nodes: lam * x_j stays on the periodic lattice
    idx = (np.arange(128) * lam + (1 - lam) * 64) % 128
    assert np.max(np.abs(Lg.values - lam ** (2 * s) * Lu.values[idx])) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(A=st.floats(-2, 2), B=st.floats(-2, 2), s=st.floats(0.05, 2.0))
def test_solution_spectrum_localized(A, B, s):
    if math.hypot(A, B) < 1e-3:
        return
    u = grid(lambda x: A * np.cos(x) + B * np.sin(x))
    tol = fractional_residual(u, s)
    assert tol <= 1e-12
    assert spectrum_localization(u, 0.01) > 1 - 10 * tol - 1e-15
