import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenberg_psido.exceptions import ConfigurationException, GridMarginException
from heisenberg_psido.heisenberg import (
    HPoint,
    MultiIndex,
    apply_word,
    dilate,
    dilate_arrays,
    gaussian_sample,
    group_dim,
    group_mul,
    group_grid,
    group_mul_arrays,
    inverse,
    random_gaussians,
    sublaplacian_apply,
    vector_field_apply,
)
from heisenberg_psido.phase_space import make_grid, mesh, sample

coordinate = st.floats(min_value=-5, max_value=5, allow_nan=False)
point = st.lists(coordinate, min_size=5, max_size=5).map(np.array)


@given(point, point, point)
def test_group_law_is_associative(g, h, k):
    left = group_mul_arrays(group_mul_arrays(g, h), k)
    right = group_mul_arrays(g, group_mul_arrays(h, k))
    assert np.allclose(left, right, atol=1e-9)


@given(point)
def test_inverse_is_negation(g):
    p = HPoint.from_array(g)
    assert np.allclose(group_mul(p, inverse(p)).as_array(), 0, atol=1e-12)


@given(point, point, st.floats(min_value=0.1, max_value=4))
def test_dilations_are_automorphisms(g, h, r):
    left = dilate_arrays(r, group_mul_arrays(g, h))
    right = group_mul_arrays(dilate_arrays(r, g), dilate_arrays(r, h))
    assert np.allclose(left, right, atol=1e-8)


def test_dilation_needs_positive_factor():
    with pytest.raises(ConfigurationException):
        dilate_arrays(0.0, np.zeros(3))


def test_multi_index_degree():
    word = MultiIndex(alpha1=(1, 0), alpha2=(0, 2), alpha3=1)
    assert word.degree == 5
    assert word.length == 4
    assert MultiIndex.zero(2).degree == 0


def test_group_dim_needs_odd_axes():
    with pytest.raises(ConfigurationException):
        group_dim(make_grid(2, 1.0, 8))


def _analytic(group_box):
    f = gaussian_sample(group_box)
    coords = mesh(group_box)
    return f, coords[..., 0], coords[..., 1], coords[..., 2]


def test_vector_fields_on_gaussian(group_box):
    f, x, y, t = _analytic(group_box)
    expected = {
        "X1": (-x + 0.5 * y * t) * f.values,
        "Y1": (-y - 0.5 * x * t) * f.values,
        "T": -t * f.values,
    }
    peak = np.max(np.abs(f.values))
    for which, values in expected.items():
        out = vector_field_apply(which, f, margin_tol=1e-6)
        assert np.max(np.abs(out.values - values)) < 1e-2 * peak, which


def test_word_applies_rightmost_first(group_box):
    f, *_ = _analytic(group_box)
    word = MultiIndex(alpha1=(1,), alpha2=(1,), alpha3=0)
    expected = vector_field_apply("X1", vector_field_apply("Y1", f))
    assert np.allclose(apply_word(word, f).values, expected.values)


def test_sublaplacian_on_gaussian(group_box):
    f, x, y, t = _analytic(group_box)
    # L exp(-(x^2+y^2)/2 - t^2/2) in closed form
    r2 = x**2 + y**2
    expected = (0.75 * r2 - 2 + 0.25 * r2 * t**2) * f.values
    out = sublaplacian_apply(f)
    assert np.max(np.abs(out.values - expected)) < 2e-2


def test_margin_check_refuses_wide_functions(group_box):
    wide = gaussian_sample(group_box, width=6.0)
    with pytest.raises(GridMarginException):
        vector_field_apply("X1", wide, margin_tol=1e-6)


@settings(max_examples=5, deadline=None)
@given(st.integers(min_value=0, max_value=1000))
def test_random_gaussians_are_seeded(seed):
    box = make_grid(3, 4.0, 16)
    first = random_gaussians(box, 2, seed)
    second = random_gaussians(box, 2, seed)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(first, second))


def test_dilate_point():
    g = dilate(2.0, HPoint(x=(1.0,), y=(2.0,), t=3.0))
    assert np.allclose(g.as_array(), [2.0, 4.0, 12.0])
    with pytest.raises(ConfigurationException):
        dilate(0.0, g)


def test_margin_is_checked_by_default():
    box = group_grid(1, 4.0, 64, 4.0, 64)
    f = sample(box, lambda p: p[..., 0] + 0j)
    with pytest.raises(GridMarginException):
        vector_field_apply("X1", f)
    with pytest.raises(GridMarginException):
        apply_word(MultiIndex(alpha1=(1,), alpha2=(0,)), f)
    with pytest.raises(GridMarginException):
        sublaplacian_apply(f)


def test_sublaplacian_of_quadratic_away_from_edges():
    box = group_grid(1, 4.0, 64, 4.0, 64)
    f = sample(box, lambda p: p[..., 0] ** 2 + p[..., 1] ** 2 + 0j)
    out = sublaplacian_apply(f, margin_tol=math.inf)
    inner = out.values[4:-4, 4:-4, 4:-4]
    assert np.allclose(inner, 4.0, atol=1e-8)


def test_commutator_of_x_and_y_is_t(group_box):
    f = gaussian_sample(group_box)
    commutator = vector_field_apply("X1", vector_field_apply("Y1", f)).values - vector_field_apply(
        "Y1", vector_field_apply("X1", f)
    ).values
    expected = vector_field_apply("T", f).values
    assert np.max(np.abs(commutator - expected)) < 2e-2 * np.max(np.abs(expected))


def test_fields_are_left_invariant(group_box):
    h = HPoint(x=(0.7,), y=(-0.4,), t=0.5)
    moved = gaussian_sample(group_box, centre=h)
    coords = group_mul_arrays(-h.as_array(), mesh(group_box))
    x, y, t = coords[..., 0], coords[..., 1], coords[..., 2]
    expected = (-x + 0.5 * y * t) * moved.values
    out = vector_field_apply("X1", moved)
    assert np.max(np.abs(out.values - expected)) < 1e-2 * np.max(np.abs(moved.values))


def test_fields_are_homogeneous_of_degree_one(group_box):
    r = 1.25
    f = gaussian_sample(group_box, width=1 / r, t_width=1 / r**2)
    x, y, t = (c for c in np.moveaxis(dilate_arrays(r, mesh(group_box)), -1, 0))
    # X1 (f0 o delta_r) = r (X1 f0) o delta_r for the unit Gaussian f0
    expected = r * (-x + 0.5 * y * t) * f.values
    out = vector_field_apply("X1", f)
    assert np.max(np.abs(out.values - expected)) < 1e-2 * np.max(np.abs(expected))
