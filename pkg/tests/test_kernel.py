"""Distance kernel A: symmetry, positivity, derivatives and bound checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotostate.kernel import (check_arcsinh_identity, check_bounds_A1,
                              check_scaling_A2, eval_A, eval_dA_da,
                              eval_dA_du, kappa, log_ratio_over_b)

finite = st.floats(-1.0, 1.0)


@given(finite, finite, st.floats(-0.3, 0.3), st.floats(0.05, 6.2))
@settings(max_examples=80, deadline=None)
def test_eval_A_symmetric_under_point_swap(u, up, a, dalpha):
    assert eval_A(u, up, a, dalpha) == pytest.approx(
        eval_A(up, u, a, -dalpha), rel=1e-13, abs=1e-15)


@given(finite, finite, st.floats(-0.3, 0.3), st.floats(0.05, 6.2))
@settings(max_examples=80, deadline=None)
def test_eval_A_positive_off_diagonal(u, up, a, dalpha):
    # squared chord distance between distinct points of embedded circles
    assert eval_A(u, up, a, dalpha) > 0.0


def test_eval_A_is_squared_chord_distance(rng):
    for _ in range(50):
        u, up = rng.uniform(-1, 1, 2)
        a = rng.uniform(0.01, 0.3)
        da = rng.uniform(0.1, 6.0)
        b = a * a
        x, xp = 1 + b * u, 1 + b * up
        z = x * np.exp(1j * da) - xp
        assert eval_A(u, up, a, da) == pytest.approx(abs(z) ** 2, rel=1e-12)


def test_log_ratio_over_b_small_width_limit(rng):
    u, up = rng.uniform(-1, 1, (2, 200))
    da = rng.uniform(0.1, 6.0, 200)
    at_tiny = log_ratio_over_b(u, up, 1e-8, da)
    at_zero = log_ratio_over_b(u, up, 0.0, da)
    assert np.max(np.abs(at_tiny - at_zero)
                  / np.maximum(np.abs(at_zero), 1e-30)) < 1e-12
    assert np.max(np.abs(at_zero - (u + up))) < 1e-14


def test_log_ratio_over_b_consistent_with_log_A(rng):
    u, up = rng.uniform(-1, 1, (2, 100))
    da = rng.uniform(0.2, 6.0, 100)
    a = 0.2
    b = a * a
    sig = np.sin(0.5 * da) ** 2
    direct = (np.log(eval_A(u, up, a, da)) - np.log(4.0 * sig)) / b
    assert np.max(np.abs(direct - log_ratio_over_b(u, up, a, da))) < 1e-10


def test_log_ratio_over_b_rejects_coincident_angles():
    with pytest.raises(ZeroDivisionError):
        log_ratio_over_b(0.1, 0.2, 0.1, 0.0)


def test_dA_da_matches_finite_differences(rng):
    u, up = rng.uniform(-1, 1, (2, 100))
    da = rng.uniform(0.1, 6.0, 100)
    a, h = 0.17, 1e-6
    fd = (eval_A(u, up, a + h, da) - eval_A(u, up, a - h, da)) / (2 * h)
    assert np.max(np.abs(fd - eval_dA_da(u, up, a, da))) < 1e-7


def test_dA_du_matches_finite_differences(rng):
    u, up, g, gp = rng.uniform(-1, 1, (4, 100))
    da = rng.uniform(0.1, 6.0, 100)
    a, h = 0.23, 1e-6
    fd = (eval_A(u + h * g, up + h * gp, a, da)
          - eval_A(u - h * g, up - h * gp, a, da)) / (2 * h)
    assert np.max(np.abs(fd - eval_dA_du(u, up, g, gp, a, da))) < 1e-8


def test_kappa_series_and_direct_branches_agree():
    z = np.array([9e-5, 1.1e-4, -9e-5, -1.1e-4])
    assert np.max(np.abs(kappa(z) - np.log1p(z) / z)) < 1e-12


def test_bounds_sample_check_passes():
    rep = check_bounds_A1(2000, a=0.25, rtilde_amp=0.01, c=0.25, seed=3)
    assert rep["ok"]


def test_scaling_check_regimes():
    bs = [1e-2, 1e-3]
    assert check_scaling_A2(0, 1, 1, bs)["regime"] == "power"
    assert check_scaling_A2(1, 0, 1, bs)["regime"] == "log"
    assert check_scaling_A2(2, 0, 1, bs)["regime"] == "bounded"
    with pytest.raises(ValueError):
        check_scaling_A2(0, 0, 1, bs)  # outside the admissible range


def test_arcsinh_identity_defect_small():
    assert abs(check_arcsinh_identity(1e-3)) < 1e-8
    with pytest.raises(ValueError):
        check_arcsinh_identity(0.0)
