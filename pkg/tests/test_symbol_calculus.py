import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heisenberg_psido.exceptions import ConfigurationException, EllipticityException
from heisenberg_psido.heisenberg import MultiIndex
from heisenberg_psido.symbol_calculus import (
    SampleBox,
    builtin_symbols,
    cutoff,
    cutoff_symbol,
    elliptic_check,
    g_words,
    identity_table,
    left_derivative,
    membership,
    operator_seminorm,
    parametrix_leading,
    shubin_seminorm,
    smooth_step,
    variable_coeff_condition,
)

SMALL_BOX = SampleBox(lam_points=4, points=9, g_points=3)


def test_xy_t_values():
    sym = builtin_symbols("XY-T", {"m": 2, "m0": 2})
    xi, u = np.array([[1.0]]), np.array([[1.0]])
    assert sym.evaluate(np.zeros(3), np.array([1.0]), xi, u)[0] == pytest.approx(-1.0)
    assert sym.evaluate(np.zeros(3), np.array([-1.0]), xi, u)[0] == pytest.approx(-1 - 2j)


@pytest.mark.parametrize(
    "name, params, n",
    [("XY-T", {}, 2), ("XY-T", {"m": 3, "m0": 2}, 1), ("XY-T", {"variant": "Z"}, 1), ("X2", {}, 1), ("Q", {}, 1)],
)
def test_builtin_symbols_validate(name, params, n):
    with pytest.raises(ConfigurationException):
        builtin_symbols(name, params, n=n)


def test_g_words_by_degree():
    words = g_words(1, 2)
    assert words[0] == MultiIndex.zero(1)
    assert max(w.degree for w in words) == 2
    assert MultiIndex(alpha1=(0,), alpha2=(0,), alpha3=1) in words


def test_left_derivative_along_x():
    g = np.array([[0.3, -0.2, 0.5]])
    word = MultiIndex(alpha1=(1,), alpha2=(0,))
    # X = d/dx - y/2 d/dt
    value = left_derivative(lambda p: p[..., 0] ** 2 + p[..., 2], g, word)
    assert value[0] == pytest.approx(2 * 0.3 + 0.1, abs=1e-8)


def test_shubin_seminorm_of_sublaplacian():
    sym = builtin_symbols("I-L")
    value = shubin_seminorm(sym, (0,), (0,), 0, MultiIndex.zero(1), SMALL_BOX)
    assert 0 < value <= 1 + 1e-12


@pytest.mark.parametrize("name", ["one", "X1", "T", "I-L"])
def test_membership_at_natural_order(name):
    report = membership(builtin_symbols(name), (4, 2, 2), SMALL_BOX)
    assert report.verdict, [r for r in report.rows if not r.passed]


def test_membership_of_xy_t_family():
    report = membership(builtin_symbols("XY-T", {"m": 2, "m0": 2}), (4, 2, 2), SMALL_BOX)
    assert report.verdict, [r for r in report.rows if not r.passed]


def test_membership_defaults_to_fourth_order():
    report = membership(builtin_symbols("one"), box=SMALL_BOX)
    assert report.orders == (4, 2, 2)
    assert len(report.rows) == 15 * 3 * len(g_words(1, 2))


def test_vanishing_derivatives_are_roundoff_rows():
    # T = i lambda: every second lambda-derivative vanishes
    report = membership(builtin_symbols("T"), (2, 0, 2), SMALL_BOX)
    rows = [r for r in report.rows if r.alpha_t == 2]
    assert rows and all(r.passed and r.note == "roundoff" for r in rows)
    first = next(r for r in report.rows if r.alpha_t == 1 and r.alpha == (0,) and r.beta == (0,))
    assert first.note == "" and first.constant == pytest.approx(1.0, rel=1e-6)


def test_membership_rejects_too_low_order():
    report = membership(builtin_symbols("I-L", {"m_class": 1}), (0, 0, 0), SMALL_BOX)
    assert not report.verdict


def test_membership_rejects_oscillating_lambda():
    report = membership(builtin_symbols("sin-inv-lambda"), (0, 0, 1), SMALL_BOX)
    assert not report.verdict


def test_membership_records_flatten_indices():
    report = membership(builtin_symbols("one"), (1, 0, 0), SMALL_BOX)
    record = report.records()[0]
    assert isinstance(record["alpha"], str)
    assert set(record) >= {"constant", "refined_constant", "growth", "passed"}


def test_operator_seminorm_of_field():
    result = operator_seminorm(builtin_symbols("X1"), 0, 0, 0, 1.0)
    assert result.value <= 1 + 1e-6
    assert result.truncation_delta <= 0.1


def test_operator_seminorm_of_identity():
    result = operator_seminorm(builtin_symbols("one"), 0, 0, 0, 1.0)
    assert result.value == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("lam", [0.25, 1.0])
def test_operator_seminorm_of_sublaplacian_matches_phase_space(lam):
    sym = builtin_symbols("I-L")
    operator_side = operator_seminorm(sym, 0, 0, 0, lam).value
    phase_side = shubin_seminorm(sym, (0,), (0,), 0, MultiIndex.zero(1), SMALL_BOX)
    assert operator_side == pytest.approx(1.0, rel=1e-3)
    assert abs(operator_side - phase_side) <= 0.1


def test_cutoff_profile():
    xi = np.array([[0.0], [1.0], [5.0]])
    u = np.zeros((3, 1))
    values = cutoff(2.0, np.ones(3), xi, u)
    assert values[0] == 0 and values[1] == 0 and values[2] == 1


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.01, max_value=64),
    st.floats(min_value=-6, max_value=6),
    st.floats(min_value=-6, max_value=6),
    st.floats(min_value=0.5, max_value=8),
)
def test_cutoff_lives_in_the_elliptic_region(lam, xi, u, R):
    value = cutoff(R, np.array([lam]), np.array([[xi]]), np.array([[u]]))[0]
    assert 0 <= value <= 1
    if value > 0:
        radius = xi**2 + u**2
        assert lam * radius >= R and radius >= 1
        assert 2 * (1 + lam * radius) >= 1 + lam * (1 + radius)


def test_sublaplacian_is_elliptic():
    report = elliptic_check(builtin_symbols("I-L"), 4.0, SMALL_BOX)
    assert report.passed
    assert report.constant > 0


def test_single_field_is_not_elliptic():
    report = elliptic_check(builtin_symbols("X1"), 4.0, SMALL_BOX)
    assert not report.passed
    assert report.constant <= 1e-10


def test_ellipticity_ignores_a_constant_phase():
    sym = builtin_symbols("I-L")
    rotated = sym.map_families(lambda fam: fam.scaled(np.exp(0.7j)))
    plain = elliptic_check(sym, 4.0, SMALL_BOX)
    turned = elliptic_check(rotated, 4.0, SMALL_BOX)
    assert turned.passed == plain.passed
    assert turned.constant == pytest.approx(plain.constant, rel=1e-12)


def test_parametrix_of_sublaplacian():
    sym = builtin_symbols("I-L")
    inverse = parametrix_leading(sym, 4.0, SMALL_BOX)
    assert inverse.order == -2
    xi, u = np.array([[4.0]]), np.array([[0.0]])
    lam = np.array([1.0])
    product = inverse.family()(lam, xi, u) * sym.family()(lam, xi, u)
    assert product[0] == pytest.approx(cutoff(4.0, lam, xi, u)[0])


def test_parametrix_is_in_the_inverse_class():
    inverse = parametrix_leading(builtin_symbols("I-L"), 4.0, SMALL_BOX)
    report = membership(inverse, (2, 0, 1), SampleBox())
    assert report.verdict, [r for r in report.rows if not r.passed]


def test_smooth_step_is_flat_at_both_ends():
    x = np.linspace(-1, 2, 301)
    values = smooth_step(x)
    assert np.all(values[x <= 0] == 0) and np.all(values[x >= 1] == 1)
    assert np.all(np.diff(values) >= -1e-15)
    assert np.allclose(values + smooth_step(1 - x), 1)
    assert smooth_step(np.array([0.01]))[0] < 1e-40


def test_cutoff_is_an_order_zero_symbol():
    report = membership(cutoff_symbol(1, 4.0), (2, 0, 1), SampleBox())
    assert report.m == 0
    assert report.verdict, [r for r in report.rows if not r.passed]


def test_parametrix_refuses_xy_t():
    with pytest.raises(EllipticityException):
        parametrix_leading(builtin_symbols("XY-T", {"m": 2, "m0": 2}), 4.0, SMALL_BOX)


def test_variable_coefficient_condition():
    passed, infimum = variable_coeff_condition(
        lambda g: 1 + 0.5 * np.sin(g[..., 0]), lambda g: np.ones(g.shape[:-1]), 1.0, SMALL_BOX
    )
    assert passed and infimum > 0
    failed, _ = variable_coeff_condition(
        lambda g: np.zeros(g.shape[:-1]), lambda g: np.sin(g[..., 0]), 1.0, SMALL_BOX
    )
    assert not failed


@pytest.mark.parametrize("Lambda, expected", [(0.0, False), (1.0, True)])
def test_pure_sublaplacian_coefficients(Lambda, expected):
    passed, infimum = variable_coeff_condition(
        lambda g: np.zeros(g.shape[:-1]), lambda g: np.ones(g.shape[:-1]), Lambda, SMALL_BOX
    )
    assert passed is expected
    assert infimum == pytest.approx(Lambda / (1 + Lambda))


def test_identity_table():
    report = identity_table(n=1, box=SMALL_BOX)
    assert report.verdict, [r for r in report.rows if not r.passed]
    names = {row.identity for row in report.rows}
    assert "Delta_t T = -I" in names and "Delta^0 a = a" in names
    assert all(row.max_error == 0 for row in report.rows if row.identity == "Delta^0 a = a")
