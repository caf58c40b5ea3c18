"""Closed-form angular integrals against an independent quadrature oracle."""

import numpy as np
import pytest

from rotostate.functional import FunctionalParams
from rotostate.grids import Field, Grid
from rotostate.profile import Profile
from rotostate.quadrature import (appendix_a_integral, exact_integral_ids,
                                  fourier_log_multiplier, integrate_singular,
                                  log_moment, quadrature_oracle)


@pytest.mark.parametrize("name", exact_integral_ids())
@pytest.mark.parametrize("m", range(1, 9))
def test_closed_forms_match_oracle(name, m):
    assert abs(appendix_a_integral(name, m)
               - quadrature_oracle(name, m)) < 1e-10


def test_fourier_log_multiplier_values():
    assert fourier_log_multiplier(0) == 0.0
    for k in (1, 2, 5):
        assert fourier_log_multiplier(k) == pytest.approx(-2 * np.pi / k)
    with pytest.raises(ValueError):
        fourier_log_multiplier(-1)


@pytest.mark.parametrize("c", [1e-3, 1e-1, 1.0])
def test_regularized_log_mean_identity(c):
    # int_{-pi}^{pi} log(2 - 2 cos t + 4 c^2) dt = 4 pi asinh(c)
    from scipy.integrate import tanhsinh

    res = tanhsinh(lambda t: np.log(2.0 - 2.0 * np.cos(t) + 4.0 * c * c),
                   0.0, np.pi, atol=1e-12)
    assert abs(2.0 * res.integral - log_moment(0, c)) < 1e-9
    assert log_moment(0, c) == pytest.approx(4 * np.pi * np.arcsinh(c))


def test_log_moment_decay_in_k():
    c = 0.3
    ks = np.arange(1, 12)
    vals = np.abs(log_moment(ks, c))
    assert np.all(np.diff(vals) < 0)


def test_unknown_integral_id_rejected():
    with pytest.raises(ValueError):
        appendix_a_integral("bogus", 2)
    with pytest.raises(ValueError):
        quadrature_oracle("bogus", 2)


def _layer_integral(n_alpha, n_s):
    g = Grid(n_alpha, n_s, m=3, n_harmonics=1)
    rt = Field(g, np.zeros((g.n_alpha, g.n_s)), parity="even", fold="m")
    factor = np.ones((g.n_alpha, g.n_s))
    vals = integrate_singular(factor, rt, 0.05, Profile())
    return float(vals[0, n_s // 2])


def test_singular_integral_resolution_convergence():
    # grid values converge monotonically toward the fine reference
    ref = _layer_integral(192, 48)
    errs = [abs(_layer_integral(na, ns) - ref)
            for na, ns in ((24, 8), (48, 16), (96, 32))]
    assert errs[0] > errs[1] > errs[2]
    # the transverse rule dominates the error and decays like 1/n_s^2
    assert errs[2] < 0.2 * errs[0]


def test_singular_integral_rejects_bad_factor_shape():
    g = Grid(48, 16, m=3, n_harmonics=4)
    rt = Field(g, np.zeros((g.n_alpha, g.n_s)), parity="even", fold="m")
    with pytest.raises(ValueError):
        integrate_singular(np.ones((3, 3)), rt, 0.05, Profile())
