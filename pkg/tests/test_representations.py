import math

import numpy as np
import pytest
from pydantic import ValidationError

from heisenberg_psido.difference_ops import derivative_matrix
from heisenberg_psido.exceptions import (
    ConfigurationException,
    LambdaBandException,
    SupportOverflowException,
    TailDominanceException,
)
from heisenberg_psido.heisenberg import HPoint, group_mul, inverse
from heisenberg_psido.phase_space import make_grid, opw_matrix, oscillator_spectrum, sample
from heisenberg_psido.representations import (
    SignedSqrt,
    calibrate_plancherel,
    displacement_matrix,
    group_fourier,
    group_fourier_matrix,
    infinitesimal_symbol,
    lambda_grid,
    pi_point,
    pi_point_matrix,
    plancherel_error,
    reference_plancherel_constant,
    signed_sqrt,
)

LAMBDAS = [-4.0, -1.0, -0.25, 0.25, 1.0, 4.0]


def test_signed_sqrt():
    assert signed_sqrt(-4.0) == -2.0
    assert signed_sqrt(9.0) == 3.0
    with pytest.raises(ValidationError):
        SignedSqrt(lam=0.0)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_pi_point_is_unitary(lam, u_grid):
    f = sample(u_grid, lambda p: np.exp(-((p[..., 0] - 0.5) ** 2)) * (1 + 1j * p[..., 0]))
    image = pi_point(lam, HPoint(x=(0.4,), y=(-0.7,), t=1.3), f)
    assert image.l2_norm() == pytest.approx(f.l2_norm(), rel=1e-8)


def test_pi_point_refuses_large_shifts(u_grid):
    f = sample(u_grid, lambda p: np.exp(-((p[..., 0] + 7) ** 2)))
    with pytest.raises(SupportOverflowException):
        pi_point(4.0, HPoint(x=(3.0,), y=(0.0,), t=0.0), f)


@pytest.mark.parametrize("lam", [-1.0, 0.5, 2.0])
def test_displacement_matches_quadrature(lam):
    g = HPoint(x=(0.5,), y=(-0.3,), t=0.7)
    closed = pi_point_matrix(lam, g, 16)
    projected = pi_point_matrix(lam, g, 16, method="quadrature", grid=make_grid(1, 12.0, 256))
    assert np.max(np.abs(closed.matrix - projected.matrix)) < 1e-8


@pytest.mark.parametrize("lam", LAMBDAS)
def test_representation_is_a_homomorphism(lam):
    g = HPoint(x=(0.3,), y=(0.2,), t=-0.4)
    h = HPoint(x=(-0.1,), y=(0.35,), t=0.9)
    product = displacement_matrix(lam, g, 40) @ displacement_matrix(lam, h, 40)
    direct = displacement_matrix(lam, group_mul(g, h), 40)
    assert np.max(np.abs(product[:10, :10] - direct[:10, :10])) < 1e-4


@pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
def test_sublaplacian_eigenvalues(lam, u_grid):
    matrix = opw_matrix(infinitesimal_symbol("L", lam, u_grid), 32).matrix
    diagonal = 1 - np.real(np.diag(matrix))[:17]
    expected = oscillator_spectrum(lam, 1, 32)[:17]
    assert np.max(np.abs(diagonal - expected)) < 1e-6 * expected.max()


@pytest.mark.parametrize("lam", [-1.0, 0.25, 4.0])
def test_field_x_is_scaled_derivative(lam, u_grid):
    matrix = opw_matrix(infinitesimal_symbol("X1", lam, u_grid), 32).matrix
    expected = math.sqrt(abs(lam)) * derivative_matrix(1, 32, 0)
    assert np.max(np.abs(matrix[:16, :16] - expected[:16, :16])) < 1e-6


def test_infinitesimal_symbol_rejects_missing_field(u_grid):
    with pytest.raises(ConfigurationException):
        infinitesimal_symbol("Y2", 1.0, u_grid)


def test_lambda_grid_integrates_with_closure():
    grid = lambda_grid(1, 1 / 16, 16.0, 64)
    values = np.exp(-grid.nodes**2) / np.abs(grid.nodes)
    assert float(np.real(grid.integrate(values))) == pytest.approx(math.sqrt(math.pi), abs=1e-3)
    assert 0 < grid.closure_fraction(values) < 0.1


def test_lambda_grid_flags_tail_dominance():
    grid = lambda_grid(1, 1 / 16, 16.0, 32)
    with pytest.raises(TailDominanceException):
        grid.check_tail(1 / np.abs(grid.nodes))


def test_lambda_grid_validates_band():
    with pytest.raises(ConfigurationException):
        lambda_grid(1, 2.0, 1.0, 8)


@pytest.mark.parametrize("lam", [-0.5, 1.0])
def test_weyl_route_matches_quadrature(lam, gaussian, u_grid):
    _, weyl = group_fourier(gaussian, lam, u_grid, dim=16)
    direct = group_fourier_matrix(gaussian, lam, 16, u_grid)
    scale = np.max(np.abs(direct.matrix))
    assert np.max(np.abs(weyl.matrix[:8, :8] - direct.matrix[:8, :8])) < 1e-3 * scale


def test_group_fourier_refuses_unresolved_lambda(gaussian, u_grid):
    with pytest.raises(LambdaBandException):
        group_fourier_matrix(gaussian, 64.0, 8, u_grid)


@pytest.mark.slow
def test_plancherel_calibration(gaussians, gaussian, small_lgrid, u_grid):
    calibration = calibrate_plancherel(gaussians, small_lgrid, 32, u_grid)
    assert calibration.spread <= 1e-2
    assert calibration.constant == pytest.approx(reference_plancherel_constant(1), rel=1e-2)
    assert plancherel_error(gaussian, small_lgrid, calibration.constant, 32, u_grid) <= 1e-2


@pytest.mark.slow
def test_narrow_band_is_tail_dominated(gaussians, u_grid):
    with pytest.raises(TailDominanceException):
        calibrate_plancherel(gaussians, lambda_grid(1, 1 / 16, 1.0, 16), 32, u_grid)


@pytest.mark.parametrize("lam", LAMBDAS)
def test_inverse_point_gives_the_adjoint(lam):
    g = HPoint(x=(0.6,), y=(-0.25,), t=0.8)
    direct = pi_point_matrix(lam, g, 24)
    assert np.allclose(pi_point_matrix(lam, inverse(g), 24).matrix, direct.adjoint().matrix, atol=1e-12)


@pytest.mark.parametrize("lam", [-1.0, 0.5])
@pytest.mark.parametrize("field", ["X1", "Y1"])
def test_infinitesimal_representation_differentiates_pi(field, lam, u_grid):
    g = HPoint(x=(0.3,), y=(-0.2,), t=0.4)
    s = 1e-4
    step = HPoint(x=(s,), y=(0.0,)) if field == "X1" else HPoint(x=(0.0,), y=(s,))
    forward = displacement_matrix(lam, group_mul(g, step), 32)
    backward = displacement_matrix(lam, group_mul(g, inverse(step)), 32)
    generator = opw_matrix(infinitesimal_symbol(field, lam, u_grid), 32).matrix
    expected = displacement_matrix(lam, g, 32) @ generator
    derivative = (forward - backward) / (2 * s)
    assert np.max(np.abs(derivative[:10, :10] - expected[:10, :10])) < 1e-5


@pytest.mark.slow
def test_plancherel_constant_converges(gaussians, u_grid):
    constants = []
    for lam_max, nodes, dim in ((4.0, 6, 8), (8.0, 12, 16), (16.0, 24, 32)):
        calibration = calibrate_plancherel(
            gaussians, lambda_grid(1, 1 / 16, lam_max, nodes), dim, u_grid, {"tail": 1.0, "truncation": 1.0, "plancherel_spread": 1.0}
        )
        constants.append(calibration.constant)
    gaps = np.abs(np.diff(constants))
    assert gaps[1] <= gaps[0]
    assert constants[-1] == pytest.approx(reference_plancherel_constant(1), rel=1e-2)
