"""Linearization at the trivial state: structure, kernel, image, crossing."""

import numpy as np
import pytest

from rotostate.functional import FunctionalParams
from rotostate.grids import Field, Grid, ModeStack, from_modes, l2_norm
from rotostate.linearalg import (analytic_linear_mode, assemble_jacobian,
                                 basis_directions, kernel_vector, odd_modes,
                                 solvability_defect, solve_in_image,
                                 transversality_coefficient)


@pytest.fixture(scope="module")
def trivial_J(tiny_params):
    g = tiny_params.grid
    return assemble_jacobian(np.zeros((g.n_alpha, g.n_s)), 0.0, tiny_params)


def test_block_diagonal_at_trivial_state(trivial_J):
    assert trivial_J.offdiag_ratio() < 1e-8


def test_kernel_is_one_dimensional(trivial_J):
    sv = trivial_J.singular_values()
    assert sv[-1] < 1e-10
    assert sv[-2] > 0.01


def test_kernel_vector_is_annihilated(trivial_J, tiny_grid):
    g = tiny_grid
    # cos(m alpha), constant in s: j=1 harmonic block, constant coefficients
    coeffs = np.zeros(g.n_harmonics * g.n_s)
    coeffs[:g.n_s] = 1.0 / np.sqrt(g.n_s)
    assert np.linalg.norm(trivial_J.apply(coeffs)) < 1e-10


def test_velocity_shift_removes_kernel(trivial_J, tiny_grid):
    # moving the angular velocity off the crossing value adds
    # -(lam - lam0) d_alpha, i.e. eps * jm on the harmonic diagonal
    g = tiny_grid
    eps = 1e-3
    harm = np.repeat(g.harmonics.astype(float), g.n_s)
    M = trivial_J.matrix + eps * np.diag(-harm)
    sv = np.linalg.svd(M, compute_uv=False)
    assert sv[-1] > eps * g.m / 2.0 - 1e-10


def test_analytic_mode_matches_assembled_blocks(trivial_J, tiny_params):
    g = tiny_params.grid
    rng = np.random.default_rng(0)
    for j in range(1, g.n_harmonics + 1):
        k = int(g.harmonics[j - 1])
        blk = trivial_J.harmonic_block(j)
        gk = rng.standard_normal(g.n_s)
        exact = analytic_linear_mode(k, gk, tiny_params.profile, g)
        assert np.max(np.abs(blk @ gk - exact)) < 1e-8


def test_fd_assembly_agrees_with_analytic(tiny_params):
    g = tiny_params.grid
    z = np.zeros((g.n_alpha, g.n_s))
    Ja = assemble_jacobian(z, 0.0, tiny_params, "analytic")
    Jf = assemble_jacobian(z, 0.0, tiny_params, "fd")
    assert np.max(np.abs(Ja.matrix - Jf.matrix)) < 1e-6
    with pytest.raises(ValueError):
        assemble_jacobian(z, 0.0, tiny_params, "bogus")


def test_solvability_defect_on_applied_vectors(trivial_J, tiny_params, rng):
    g = tiny_params.grid
    for _ in range(20):
        c = rng.standard_normal(g.n_harmonics * g.n_s)
        out = trivial_J.apply(c).reshape(g.n_harmonics, g.n_s)
        q = from_modes(ModeStack(g, out, parity="odd"))
        assert abs(solvability_defect(q, tiny_params.profile)) < 1e-9


def test_solvability_defect_detects_cokernel(tiny_params):
    g = tiny_params.grid
    phi = tiny_params.profile.phi(g.s)
    q = Field(g, phi[None, :] * np.sin(g.m * g.alpha)[:, None],
              parity="odd", fold="m")
    assert abs(solvability_defect(q, tiny_params.profile)) > 0.1 * l2_norm(q)


def test_solve_in_image_round_trip(trivial_J, tiny_params, rng):
    g = tiny_params.grid
    c = rng.standard_normal(g.n_harmonics * g.n_s)
    out = trivial_J.apply(c).reshape(g.n_harmonics, g.n_s)
    q = from_modes(ModeStack(g, out, parity="odd"))
    sol = solve_in_image(q, tiny_params)
    back = trivial_J.apply(_even_coeffs(g, sol))
    assert np.max(np.abs(back - out.reshape(-1))) < 1e-8


def _even_coeffs(g, f):
    vhat = np.fft.rfft(f.values, axis=0) / g.n_alpha
    return (2.0 * vhat[g.harmonics].real).reshape(-1)


def test_solve_in_image_rejects_cokernel_component(tiny_params):
    g = tiny_params.grid
    phi = tiny_params.profile.phi(g.s)
    q = Field(g, phi[None, :] * np.sin(g.m * g.alpha)[:, None],
              parity="odd", fold="m")
    with pytest.raises(ValueError):
        solve_in_image(q, tiny_params)


@pytest.mark.parametrize("m,dlam", [(2, 0.5), (3, 1.0)])
def test_transversality_equals_m_times_slope(m, dlam):
    g = Grid(48, 16, m=m, n_harmonics=4)
    params = FunctionalParams(m=m, dlambda_da=dlam, grid=g)
    tc = transversality_coefficient(m, params)
    assert abs(abs(tc) - m * dlam) < 1e-6


def test_kernel_vector_normalized(tiny_grid):
    kv = kernel_vector(tiny_grid.m, tiny_grid)
    assert l2_norm(kv) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        kernel_vector(tiny_grid.m + 1, tiny_grid)
