"""Collocation grid: spectral derivatives, node calculus and transforms."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotostate.grids import (Field, Grid, ModeStack, barycentric_interp,
                             from_modes, l2_norm, symmetrize, to_modes)


def test_auto_resolution_is_a_multiple_of_2m():
    for m in (2, 3, 4, 5, 7):
        g = Grid(m=m)
        assert g.n_alpha >= 256
        assert g.n_alpha % (2 * m) == 0


def test_angular_derivative_exact_on_harmonics(tiny_grid):
    g = tiny_grid
    for j in (1, 2, 3):
        k = j * g.m
        v = np.cos(k * g.alpha)[:, None] * np.ones((1, g.n_s))
        dv = g.alpha_derivative(v)
        exact = -k * np.sin(k * g.alpha)[:, None]
        assert np.max(np.abs(dv - exact)) < 1e-12


def test_transverse_derivative_exact_on_polynomials(tiny_grid):
    g = tiny_grid
    rngdeg = range(g.n_s)  # exact up to degree n_s - 1
    for deg in rngdeg:
        v = g.s**deg
        dv = g.diff_s @ v
        exact = deg * g.s ** max(deg - 1, 0) if deg else np.zeros_like(g.s)
        assert np.max(np.abs(dv - exact)) < 1e-10


def test_quadrature_weights_integrate_polynomials(tiny_grid):
    g = tiny_grid
    # Gauss rule with n_s nodes is exact through degree 2 n_s - 1
    for deg in (0, 2, 7, 2 * g.n_s - 1):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        assert abs(np.sum(g.w_s * g.s**deg) - exact) < 1e-12


def test_barycentric_interp_reproduces_nodes_and_polynomials(tiny_grid):
    g = tiny_grid
    vals = g.s**3 - 0.5 * g.s
    at_nodes = barycentric_interp(g.s, g.bary_w, vals, g.s)
    assert np.max(np.abs(at_nodes - vals)) < 1e-13
    t = np.linspace(-1, 1, 17)
    assert np.max(np.abs(barycentric_interp(g.s, g.bary_w, vals, t)
                         - (t**3 - 0.5 * t))) < 1e-12


def test_mode_round_trip(tiny_grid, rng):
    g = tiny_grid
    coeffs = rng.standard_normal((g.n_harmonics, g.n_s))
    f = from_modes(ModeStack(g, coeffs, parity="even"))
    back = to_modes(f)
    assert np.max(np.abs(back.coeffs - coeffs)) < 1e-12


def test_symmetrize_produces_checked_symmetry(tiny_grid, rng):
    g = tiny_grid
    f = symmetrize(g, rng.standard_normal((g.n_alpha, g.n_s)), "even")
    assert f.check_symmetry() < 1e-12
    f = symmetrize(g, rng.standard_normal((g.n_alpha, g.n_s)), "odd")
    assert f.check_symmetry() < 1e-12


def test_field_rejects_wrong_shape(tiny_grid):
    with pytest.raises(ValueError):
        Field(tiny_grid, np.zeros((3, 3)), parity="even", fold="m")


@given(st.integers(1, 3), st.floats(0.1, 2.0))
@settings(max_examples=20, deadline=None)
def test_l2_norm_of_pure_harmonic(j, amp):
    g = Grid(48, 16, m=3, n_harmonics=4)
    v = amp * np.cos(j * g.m * g.alpha)[:, None] * np.ones((1, g.n_s))
    f = Field(g, v, parity="even", fold="m")
    # angular mean of cos^2 is 1/2 and the s-weights sum to 2
    assert l2_norm(f) == pytest.approx(amp * np.sqrt(2.0 * np.pi), rel=1e-12)
