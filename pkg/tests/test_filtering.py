import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from planetomo import (
    FilteredProfile,
    interp_profile,
    linear_profile,
    second_difference,
    second_difference_grid,
    trilinear_profile,
)
from planetomo.filtering import (
    DERIVATIVE_MODES,
    PAPER_SCALE,
    TRUE_SECOND_DERIVATIVE,
    central_offsets,
    derivative_scale,
)


def stencil_oracle(p, scale):
    # Scalar reference: q_m = scale * (p_{m+1} + p_{m-1} - 2 p_m) with the
    # list indexed by m+1, written with math-module arithmetic only.
    return [scale * (p[i + 2] + p[i] - 2.0 * p[i + 1]) for i in range(len(p) - 2)]


def extended_offsets(m_count):
    return [2.0 * m / (m_count - 1) - 1.0 for m in range(-1, m_count + 1)]


# -- scaling ----------------------------------------------------------------


def test_derivative_modes():
    assert DERIVATIVE_MODES == ("paper", "true")
    assert derivative_scale(9, PAPER_SCALE) == 8.0
    assert derivative_scale(9, TRUE_SECOND_DERIVATIVE) == 16.0
    with pytest.raises(ValueError, match="unknown derivative mode"):
        derivative_scale(9, "raw")


def test_scale_ratio_identity():
    for m_count in (3, 9, 64, 65, 100, 257):
        paper = derivative_scale(m_count, PAPER_SCALE)
        true = derivative_scale(m_count, TRUE_SECOND_DERIVATIVE)
        assert true == paper * (m_count - 1) / 4.0


# -- second difference, scalar ----------------------------------------------


def test_constant_profile_filters_to_exact_zero():
    for mode in DERIVATIVE_MODES:
        q = second_difference(np.full(12, 3.7), mode)
        assert_array_equal(q.values, np.zeros(10))


def test_linear_profile_filters_to_near_zero():
    s = np.array(extended_offsets(50))
    q = second_difference(2.5 * s - 0.3, TRUE_SECOND_DERIVATIVE)
    assert np.max(np.abs(q.values)) < 1e-10


def test_quadratic_profile_true_mode_gives_two():
    for m_count in (9, 33, 101):
        s = np.array(extended_offsets(m_count))
        q = second_difference(s**2, TRUE_SECOND_DERIVATIVE)
        assert_allclose(q.values, 2.0, atol=1e-9)


def test_quadratic_profile_paper_mode_oracle():
    # Same quadratic, paper scaling: the raw stencil is 2 h^2 with
    # h = 2/(M-1), so the value is 8/(M-1); for M=9 that is 1 exactly.
    m_count = 9
    s = extended_offsets(m_count)
    p = [x * x for x in s]
    expected = stencil_oracle(p, float(m_count - 1))
    q = second_difference(np.array(p), PAPER_SCALE)
    assert_allclose(q.values, expected, rtol=1e-15)
    assert_allclose(q.values, 1.0, atol=1e-9)


def test_matches_scalar_oracle_on_random_profile():
    rng = np.random.default_rng(5)
    p = rng.normal(size=23)
    for mode in DERIVATIVE_MODES:
        expected = stencil_oracle(list(p), derivative_scale(21, mode))
        assert_allclose(second_difference(p, mode).values, expected, rtol=1e-15)


def test_mode_ratio_is_exact_global_factor():
    rng = np.random.default_rng(6)
    p = rng.normal(size=67)  # M = 65, (M-1)/4 = 16: both scales are powers of two
    paper = second_difference(p, PAPER_SCALE).values
    true = second_difference(p, TRUE_SECOND_DERIVATIVE).values
    assert_array_equal(true, paper * 16.0)

    p = rng.normal(size=66)  # M = 64, factor 63/4
    paper = second_difference(p, PAPER_SCALE).values
    true = second_difference(p, TRUE_SECOND_DERIVATIVE).values
    assert_allclose(true, paper * (63 / 4), rtol=1e-15)


def test_filter_is_linear():
    rng = np.random.default_rng(7)
    p, q = rng.normal(size=(2, 30))
    lhs = second_difference(2.0 * p - 3.0 * q, PAPER_SCALE).values
    rhs = 2.0 * second_difference(p, PAPER_SCALE).values
    rhs -= 3.0 * second_difference(q, PAPER_SCALE).values
    assert_allclose(lhs, rhs, atol=1e-12)


def test_sine_profile_converges_at_second_order():
    # True-mode filtering of sin(pi s) approximates -pi^2 sin(pi s);
    # halving the spacing must cut the max error about fourfold.
    errors = {}
    for m_count in (100, 200):
        s_ext = np.array(extended_offsets(m_count))
        q = second_difference(np.sin(np.pi * s_ext), TRUE_SECOND_DERIVATIVE)
        exact = -math.pi**2 * np.sin(np.pi * q.offsets)
        errors[m_count] = np.max(np.abs(q.values - exact))
    assert errors[100] < 0.004
    assert errors[200] <= 0.3 * errors[100]


def test_offsets_are_central():
    q = second_difference(np.zeros(7), PAPER_SCALE)
    assert_array_equal(q.offsets, central_offsets(5))
    assert q.offsets[0] == -1.0
    assert q.offsets[-1] == 1.0
    assert_allclose(np.diff(q.offsets), 0.5)


def test_rejects_short_and_misshapen_input():
    with pytest.raises(ValueError, match="at least 5 samples"):
        second_difference(np.zeros(4))
    with pytest.raises(ValueError, match="1D profile"):
        second_difference(np.zeros((6, 2)))


# -- second difference, grid ------------------------------------------------


def test_grid_filter_equals_columnwise_scalar():
    rng = np.random.default_rng(8)
    p = rng.normal(size=(12, 3, 4))
    for mode in DERIVATIVE_MODES:
        grid = second_difference_grid(p, mode)
        assert grid.shape == (10, 3, 4)
        for a in range(3):
            for b in range(4):
                assert_array_equal(grid[:, a, b], second_difference(p[:, a, b], mode).values)


def test_grid_filter_rejects_wrong_rank():
    with pytest.raises(ValueError, match=r"\(M\+2, gh, gw\)"):
        second_difference_grid(np.zeros(8))
    with pytest.raises(ValueError, match="at least 5 samples"):
        second_difference_grid(np.zeros((4, 2, 2)))


def test_grid_single_cell_matches_scalar_profile():
    rng = np.random.default_rng(9)
    p = rng.normal(size=18)
    grid = second_difference_grid(p[:, None, None], PAPER_SCALE)
    assert_array_equal(grid[:, 0, 0], second_difference(p, PAPER_SCALE).values)


# -- profile sampling -------------------------------------------------------


def test_linear_profile_endpoints_exact():
    values = np.array([2.0, -1.0, 5.0, 0.5])
    assert linear_profile(values, -1.0) == 2.0
    assert linear_profile(values, 1.0) == 0.5


def test_linear_profile_hits_sample_points():
    rng = np.random.default_rng(10)
    values = rng.normal(size=9)
    s = central_offsets(9)
    assert_allclose(linear_profile(values, s), values, rtol=1e-12, atol=1e-12)


def test_linear_profile_midpoints_average():
    values = np.array([1.0, 3.0])
    assert linear_profile(values, 0.0) == 2.0
    values = np.array([0.0, 1.0, 4.0])
    assert linear_profile(values, -0.5) == 0.5
    assert linear_profile(values, 0.5) == 2.5


def test_linear_profile_zero_outside():
    values = np.ones(5)
    s = np.array([-1.5, -1.0 - 1e-12, 1.0 + 1e-12, 3.0])
    assert_array_equal(linear_profile(values, s), np.zeros(4))


def test_linear_profile_keeps_shape():
    values = np.arange(6.0)
    s = np.zeros((2, 3))
    assert linear_profile(values, s).shape == (2, 3)


def test_trilinear_single_cell_reduces_to_linear_bitwise():
    rng = np.random.default_rng(11)
    column = rng.normal(size=15)
    tensor = column[:, None, None]
    s = rng.uniform(-1.4, 1.4, size=500)
    u = rng.uniform(-3.0, 3.0, size=500)
    v = rng.uniform(-3.0, 3.0, size=500)
    assert_array_equal(trilinear_profile(tensor, s, u, v), linear_profile(column, s))


def test_trilinear_hits_grid_nodes():
    rng = np.random.default_rng(12)
    tensor = rng.normal(size=(5, 3, 4))
    s = central_offsets(5)
    u = central_offsets(3)
    v = central_offsets(4)
    for i in range(5):
        for j in range(3):
            for k in range(4):
                got = trilinear_profile(tensor, s[i], u[j], v[k])
                assert got == pytest.approx(tensor[i, j, k], rel=1e-12)


def test_trilinear_zero_outside_plane_extent():
    tensor = np.ones((5, 3, 3))
    assert trilinear_profile(tensor, 0.0, 1.0 + 1e-9, 0.0) == 0.0
    assert trilinear_profile(tensor, 0.0, 0.0, -1.0 - 1e-9) == 0.0
    assert trilinear_profile(tensor, 1.0 + 1e-9, 0.0, 0.0) == 0.0
    assert trilinear_profile(tensor, 0.0, 1.0, -1.0) == 1.0


def test_trilinear_interpolates_in_plane():
    tensor = np.zeros((3, 2, 2))
    tensor[1] = [[0.0, 1.0], [2.0, 3.0]]
    assert trilinear_profile(tensor, 0.0, 0.0, 0.0) == 1.5
    assert trilinear_profile(tensor, 0.0, -1.0, 0.0) == 0.5
    assert trilinear_profile(tensor, 0.0, 1.0, 1.0) == 3.0


def test_interp_profile_round_trip():
    s_ext = np.array(extended_offsets(9))
    profile = second_difference(s_ext**3, TRUE_SECOND_DERIVATIVE)
    for s_m, q_m in zip(profile.offsets, profile.values):
        assert interp_profile(profile, s_m) == pytest.approx(q_m, rel=1e-12)
    mid = 0.5 * (profile.values[3] + profile.values[4])
    s_mid = 0.5 * (profile.offsets[3] + profile.offsets[4])
    assert interp_profile(profile, s_mid) == pytest.approx(mid, rel=1e-12)
    assert interp_profile(profile, 2.0) == 0.0


def test_filtered_profile_is_plain_data():
    p = FilteredProfile(values=np.arange(3.0), offsets=central_offsets(3))
    assert_array_equal(p.values, [0.0, 1.0, 2.0])
