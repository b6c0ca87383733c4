import math

import numpy as np
import pytest

from heisenberg_psido import config
from heisenberg_psido.difference_ops import (
    SymbolFamily,
    delta_power,
    delta_t,
    delta_x,
    delta_y,
    derenormalize,
    derivative_matrix,
    difference_by_commutator,
    mixed_partial,
    position_matrix,
    renormalize,
    stencil,
    tilde_partial,
    tilde_partial_literal,
)
from heisenberg_psido.exceptions import LambdaBandException, NonSmoothSymbolException
from heisenberg_psido.heisenberg import MultiIndex
from heisenberg_psido.phase_space import RepOperator, WeylSymbol, make_grid
from heisenberg_psido.symbol_calculus import builtin_symbols

LAMBDAS = np.array([-4.0, -1.0, -0.25, 0.25, 1.0, 4.0])
XI = np.linspace(-3, 3, 7)[:, None]
U = np.linspace(-2, 2, 7)[:, None]


def field(name: str) -> SymbolFamily:
    return builtin_symbols(name).family()


def on_box(fam: SymbolFamily, lam: float) -> np.ndarray:
    return fam(np.full(7, lam), XI, U)


def test_stencil_weights():
    offsets, weights = stencil(1)
    assert offsets.tolist() == [-2, -1, 0, 1, 2]
    assert np.allclose(weights, np.array([1, -8, 0, 8, -1]) / 12)
    _, second = stencil(2)
    assert np.allclose(second, np.array([-1, 16, -30, 16, -1]) / 12)


def test_mixed_partial_of_product():
    x, y = 0.3, -0.7
    value = mixed_partial(lambda d: np.sin(x + d[0]) * np.exp(y + d[1]), [1, 1], [1.0, 1.0])
    assert value == pytest.approx(math.cos(x) * math.exp(y), abs=1e-8)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_first_order_identities(lam):
    assert np.allclose(on_box(delta_x(1, field("X1")), lam), -1, atol=1e-6)
    assert np.allclose(on_box(delta_y(1, field("Y1")), lam), -1, atol=1e-6)
    assert np.allclose(on_box(delta_x(1, field("Y1")), lam), 0, atol=1e-6)
    assert np.allclose(on_box(delta_y(1, field("T")), lam), 0, atol=1e-6)
    assert np.allclose(on_box(delta_t(field("T")), lam), -1, atol=1e-6)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_sublaplacian_identities(lam):
    sub = field("L")
    assert np.allclose(on_box(delta_x(1, sub), lam), -2 * on_box(field("X1"), lam), atol=1e-6)
    assert np.allclose(on_box(delta_y(1, sub), lam), -2 * on_box(field("Y1"), lam), atol=1e-6)
    assert np.allclose(on_box(delta_t(sub), lam), 0, atol=1e-6)


def test_tilde_partial_of_t_is_i():
    assert np.allclose(on_box(tilde_partial(field("T")), 2.0), 1j, atol=1e-6)


def test_tilde_partial_kills_homogeneous_degree_zero():
    fam = SymbolFamily(n=1, evaluator=lambda lam, xi, u: np.sign(xi[..., 0]) + 0 * lam)
    xi = np.array([[1.5], [-0.5]])
    u = np.zeros((2, 1))
    assert np.allclose(tilde_partial_literal(fam, np.array([1.0, 3.0]), xi, u), 0, atol=1e-8)


def test_powers_compose():
    sub = field("L")
    zero = MultiIndex.zero(1)
    assert delta_power(zero, sub) is sub
    twice = delta_power(MultiIndex(alpha1=(2,), alpha2=(0,)), sub)
    assert np.allclose(on_box(twice, 1.0), 2, atol=1e-5)
    mixed = delta_power(MultiIndex(alpha1=(1,), alpha2=(1,)), sub)
    assert np.allclose(on_box(mixed, -0.25), 0, atol=1e-5)


def test_renormalize_field():
    tilde = renormalize(field("X1"))
    assert np.allclose(on_box(tilde, 4.0), 1j * XI[:, 0])
    back = derenormalize(tilde)
    assert np.allclose(on_box(back, -0.25), on_box(field("X1"), -0.25), atol=1e-14)


@pytest.mark.parametrize("lam", [-4.0, -0.25, 1.0])
def test_literal_operator_matches_renormalised_derivative(lam):
    fam = SymbolFamily(
        n=1,
        evaluator=lambda lam_, xi, u: lam_**2 * xi[..., 0] ** 2 * u[..., 0] + 1j * lam_ * xi[..., 0] + u[..., 0] ** 3,
    )
    lams = np.full(7, lam)
    assert np.allclose(tilde_partial_literal(fam, lams, XI, U), tilde_partial(fam)(lams, XI, U), atol=1e-6)


def test_non_smooth_symbol_is_refused():
    step = SymbolFamily(n=1, evaluator=lambda lam, xi, u: np.where(xi[..., 0] >= 0, 1.0, 0.0) + 0 * lam)
    with pytest.raises(NonSmoothSymbolException):
        delta_x(1, step)(1.0, np.zeros((1, 1)), np.zeros((1, 1)))


def test_lambda_band_is_enforced():
    fam = SymbolFamily(n=1, evaluator=lambda lam, xi, u: lam + 0 * xi[..., 0], lambda_band=(0.5, 2.0))
    with pytest.raises(LambdaBandException):
        fam(4.0, np.zeros((1, 1)), np.zeros((1, 1)))


@pytest.mark.parametrize("lam", [-2.0, 0.5])
def test_commutator_form_agrees(lam):
    dim = 24
    sub = RepOperator(lam=lam, dim=dim, matrix=np.diag(-abs(lam) * (2 * np.arange(dim) + 1.0)))
    out = difference_by_commutator("x", 1, sub)
    assert np.allclose(out.matrix, -2 * math.sqrt(abs(lam)) * derivative_matrix(1, dim, 0), atol=1e-12)


def test_ladder_matrices():
    x = position_matrix(1, 6, 0)
    assert np.allclose(x, x.T)
    assert x[0, 1] == pytest.approx(1 / math.sqrt(2))
    d = derivative_matrix(1, 6, 0)
    assert np.allclose(d, -d.T)


def test_family_from_renormalised_samples():
    grid = make_grid(1, 6.0, 64)
    sampled = WeylSymbol(u_grid=grid, func=lambda xi, u: 1j * xi[..., 0] + 0 * u[..., 0])
    fam = SymbolFamily.from_renormalized(WeylSymbol(u_grid=grid, values=sampled.sampled()))
    xi = np.array([[0.5], [-1.0]])
    u = np.zeros((2, 1))
    assert np.allclose(fam(np.array([4.0, 4.0]), xi, u), 1j * 2 * xi[:, 0], atol=1e-8)


def test_vanishing_high_order_partial_stays_within_roundoff():
    lam = np.array([0.03, 0.5, 12.0])
    value, roundoff = mixed_partial(
        lambda d: (lam + d[1]) / (lam + d[1]) + 0 * d[0], [4, 2], [1.0, lam], with_roundoff=True
    )
    assert np.all(np.abs(value) <= config.ROUNDOFF_FACTOR * roundoff)


def test_family_reports_roundoff_of_vanishing_derivative():
    twice = tilde_partial(tilde_partial(field("T")))
    value, roundoff = twice.value_and_roundoff(np.full(7, 0.0625), XI, U)
    assert np.all(roundoff > 0)
    assert np.all(np.abs(value) <= config.ROUNDOFF_FACTOR * roundoff)
    once = tilde_partial(field("T"))
    value, roundoff = once.value_and_roundoff(np.full(7, 0.0625), XI, U)
    assert np.allclose(value, 1j, atol=1e-8)
    assert np.all(config.ROUNDOFF_FACTOR * roundoff < 1e-3)
