"""Schrödinger representations, the group Fourier transform and Plancherel.

pi_lambda(x, y, t) f(u) = e^{i lambda (t + x.y/2)} e^{i sqrt(lambda) y.u} f(u + sqrt|lambda| x)
with the signed square root sqrt(lambda) = sgn(lambda) sqrt|lambda|.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, validator
from scipy import fft as sfft
from scipy import special

from heisenberg_psido import config
from heisenberg_psido.exceptions import (
    CalibrationException,
    ConfigurationException,
    LambdaBandException,
    SupportOverflowException,
    TailDominanceException,
    TruncationException,
)
from heisenberg_psido.heisenberg import HPoint, group_dim, parse_field
from heisenberg_psido.phase_space import (
    Grid,
    GridFunction,
    RepOperator,
    WeylSymbol,
    basis_matrix,
    cell_volume,
    grid_shape,
    hermite_functions,
    hermite_indices,
    hs_norm,
    make_grid,
    mesh,
    opw_matrix,
)

logger = logging.getLogger(__name__)


class SignedSqrt(BaseModel):
    lam: float

    class Config:
        allow_mutation = False

    @validator("lam")
    def validate_lam(cls, v, values, **kwargs):
        assert v != 0 and math.isfinite(v), "Lambda must be finite and nonzero"
        return v

    @property
    def value(self) -> float:
        return math.copysign(math.sqrt(abs(self.lam)), self.lam)


def signed_sqrt(lam: float) -> float:
    return SignedSqrt(lam=lam).value


def _check_lambda(lam: float):
    if lam == 0 or not math.isfinite(lam):
        raise ConfigurationException("Lambda must be finite and nonzero", data={"lambda": lam})


def reference_plancherel_constant(n: int) -> float:
    """c_n for the measure c_n |lambda|^n d lambda under the conventions used here."""
    return (2 * math.pi) ** (-(n + 1))


def reference_inversion_constant(n: int) -> float:
    return (2 * math.pi) ** -0.5


# ---------------------------------------------------------------- lambda grid


class LambdaGrid(BaseModel):
    """Nodes on +-[lam_min, lam_max] with weights for int G(lambda) |lambda|^n d lambda.

    Trapezoid in log|lambda|. Integrands met here behave like |lambda|^{-n} near 0,
    so the first node of each sign also carries the rectangle lam_min^{n+1}
    closing (0, lam_min].
    """

    n: int
    lam_min: float
    lam_max: float
    nodes: np.ndarray
    weights: np.ndarray
    closure_weights: np.ndarray
    plancherel_constant: float

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("weights")
    def validate_weights(cls, v, values, **kwargs):
        nodes = values.get("nodes")
        assert nodes is not None and v.shape == nodes.shape, "One weight per node"
        assert np.all(v > 0), "Weights must be positive"
        assert not np.any(nodes == 0), "Lambda = 0 is excluded"
        assert np.allclose(np.sort(nodes), -np.sort(nodes)[::-1]), "Nodes must be symmetric"
        return v

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> complex:
        """int G |lambda|^n d lambda for G sampled at the nodes (leading axis)."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=([0], [0]))

    def closure_fraction(self, values: np.ndarray) -> float:
        total = abs(self.integrate(values))
        if total == 0:
            return 0.0
        return float(abs(np.sum(self.closure_weights * np.asarray(values))) / total)

    def tail_fraction(self, values: np.ndarray) -> float:
        """lam_max |G(+-lam_max)| lam_max^n relative to the whole integral."""
        values = np.asarray(values)
        total = abs(self.integrate(values))
        if total == 0:
            return 0.0
        edge = np.abs(self.nodes) == np.max(np.abs(self.nodes))
        return float(np.sum(self.lam_max ** (self.n + 1) * np.abs(values[edge])) / total)

    def check_tail(self, values: np.ndarray, tol: Optional[float] = None) -> float:
        tol = config.TOLERANCES["tail"] if tol is None else tol
        fraction = self.tail_fraction(values)
        if fraction > tol:
            raise TailDominanceException(
                data={"tail_fraction": fraction, "tol": tol, "lam_max": self.lam_max}
            )
        return fraction

    def refined(self) -> "LambdaGrid":
        """Band doubled at both ends and node density kept."""
        per_sign = self.size // 2
        extra = int(round(per_sign * math.log(4) / math.log(self.lam_max / self.lam_min)))
        return lambda_grid(
            self.n, self.lam_min / 2, self.lam_max * 2, per_sign + extra, self.plancherel_constant
        )


def lambda_grid(
    n: int = config.GROUP_DIM,
    lam_min: float = config.LAMBDA_MIN,
    lam_max: float = config.LAMBDA_MAX,
    nodes_per_sign: int = config.LAMBDA_NODES,
    plancherel_constant: Optional[float] = None,
) -> LambdaGrid:
    if not 0 < lam_min < lam_max:
        raise ConfigurationException("Need 0 < lam_min < lam_max", data={"lam_min": lam_min, "lam_max": lam_max})
    if nodes_per_sign < 2:
        raise ConfigurationException("Need at least two lambda nodes per sign")
    logs = np.linspace(math.log(lam_min), math.log(lam_max), nodes_per_sign)
    step = logs[1] - logs[0]
    trap = np.full(nodes_per_sign, step)
    trap[[0, -1]] = step / 2
    positive = np.exp(logs)
    weights = trap * positive ** (n + 1)
    closure = np.zeros(nodes_per_sign)
    closure[0] = lam_min ** (n + 1)
    weights = weights + closure

    nodes = np.concatenate([-positive[::-1], positive])
    return LambdaGrid(
        n=n,
        lam_min=lam_min,
        lam_max=lam_max,
        nodes=nodes,
        weights=np.concatenate([weights[::-1], weights]),
        closure_weights=np.concatenate([closure[::-1], closure]),
        plancherel_constant=plancherel_constant or reference_plancherel_constant(n),
    )


# ---------------------------------------------------------------- pi_lambda(g)


def _wavenumbers(grid: Grid) -> list[np.ndarray]:
    return [2 * math.pi * sfft.fftfreq(g.points, d=g.spacing) for g in grid]


def _support_loss(f: GridFunction, shift: np.ndarray) -> tuple[float, np.ndarray]:
    """Fraction of |f|^2 that leaves the box under u -> u + shift, and the valid output mask."""
    keep_in = np.ones(f.values.shape, dtype=bool)
    valid_out = np.ones(f.values.shape, dtype=bool)
    for axis, g in enumerate(f.grid):
        shape = [1] * f.dim
        shape[axis] = g.points
        nodes = g.nodes.reshape(shape)
        keep_in = keep_in & (np.abs(nodes - shift[axis]) <= g.half_width)
        valid_out = valid_out & (np.abs(nodes + shift[axis]) <= g.half_width)
    total = np.sum(np.abs(f.values) ** 2)
    if total == 0:
        return 0.0, valid_out
    lost = 1.0 - np.sum(np.abs(f.values[keep_in]) ** 2) / total
    return float(max(lost, 0.0)), valid_out


def pi_point(lam: float, g: HPoint, f: GridFunction, tol: Optional[float] = None) -> GridFunction:
    _check_lambda(lam)
    n = f.dim
    if g.n != n:
        raise ConfigurationException("Point and function dimensions differ", data={"point": g.n, "function": n})
    tol = config.TOLERANCES["support_loss"] if tol is None else tol
    x, y = np.array(g.x), np.array(g.y)
    shift = math.sqrt(abs(lam)) * x

    lost, valid = _support_loss(f, shift)
    if lost > tol:
        raise SupportOverflowException(data={"lost_fraction": lost, "tol": tol, "shift": shift.tolist()})
    if lost > 1e-12:
        logger.warning("pi_point: %.3e of the mass leaves the grid", lost)

    spectrum = sfft.fftn(f.values)
    for axis, k in enumerate(_wavenumbers(f.grid)):
        shape = [1] * n
        shape[axis] = len(k)
        spectrum = spectrum * np.exp(1j * k * shift[axis]).reshape(shape)
    shifted = np.where(valid, sfft.ifftn(spectrum), 0)

    u = mesh(f.grid)
    phase = lam * (g.t + 0.5 * float(x @ y)) + signed_sqrt(lam) * (u @ y)
    return f.with_values(np.exp(1j * phase) * shifted)


def _displacement_1d(alpha, size: int) -> np.ndarray:
    """<m| exp(alpha a^+ - conj(alpha) a) |k> for m, k < size; ``alpha`` may be an array."""
    alpha = np.asarray(alpha, dtype=complex)[..., None, None]
    r2 = np.abs(alpha) ** 2
    m = np.arange(size)[:, None]
    k = np.arange(size)[None, :]
    low, high = np.minimum(m, k), np.maximum(m, k)
    gap = high - low
    ratio = np.exp(0.5 * (special.gammaln(low + 1) - special.gammaln(high + 1)))
    base = np.where(m >= k, alpha, -np.conj(alpha))
    power = np.where(gap == 0, 1.0 + 0j, base ** gap.astype(float))
    laguerre = special.eval_genlaguerre(low, gap, r2)
    return ratio * power * np.exp(-r2 / 2) * laguerre


def displacement_matrix(lam: float, g: HPoint, dim: int) -> np.ndarray:
    """Closed form of pi_lambda(g) on the first ``dim`` Hermite functions.

    pi_lambda(x, y, t) = e^{i lambda t} prod_j D(alpha_j) with
    alpha_j = (-sqrt|lambda| x_j + i sqrt(lambda) y_j) / sqrt 2.
    """
    x = np.array(g.x)[None, :]
    y = np.array(g.y)[None, :]
    return np.exp(1j * lam * g.t) * displacement_matrices(lam, x, y, dim)[0]


def displacement_matrices(lam: float, x: np.ndarray, y: np.ndarray, dim: int) -> np.ndarray:
    """pi_lambda(x, y, 0) for many points; ``x`` and ``y`` have shape (Q, n), result (Q, dim, dim)."""
    _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    indices = hermite_indices(n, dim)
    matrix = np.ones((x.shape[0], dim, dim), dtype=complex)
    root, signed = math.sqrt(abs(lam)), signed_sqrt(lam)
    for j in range(n):
        alpha = (-root * x[:, j] + 1j * signed * y[:, j]) / math.sqrt(2)
        block = _displacement_1d(alpha, int(indices[:, j].max()) + 1)
        matrix = matrix * block[:, indices[:, j][:, None], indices[:, j][None, :]]
    return matrix


def pi_point_matrix(
    lam: float,
    g: HPoint,
    dim: int = config.HERMITE_DIM,
    method: str = "displacement",
    grid: Optional[Grid] = None,
) -> RepOperator:
    if method == "displacement":
        return RepOperator(lam=lam, dim=dim, matrix=displacement_matrix(lam, g, dim))
    if method != "quadrature":
        raise ConfigurationException(f"Unknown method {method}")
    grid = grid or make_grid(g.n, config.HALF_WIDTH, config.POINTS)
    basis = basis_matrix(grid, dim)
    shape = grid_shape(grid)
    images = np.stack(
        [pi_point(lam, g, GridFunction(grid=grid, values=basis[:, k].reshape(shape))).values.ravel() for k in range(dim)],
        axis=1,
    )
    return RepOperator(lam=lam, dim=dim, matrix=basis.T @ images * cell_volume(grid))


# ---------------------------------------------------------------- pi_lambda(X)


def infinitesimal_symbol(which: str, lam: float, grid: Grid) -> WeylSymbol:
    """Weyl symbols of pi_lambda(X_j), pi_lambda(Y_j), pi_lambda(T) and pi_lambda(L)."""
    _check_lambda(lam)
    root, signed = math.sqrt(abs(lam)), signed_sqrt(lam)
    if which.upper() == "L":
        return WeylSymbol(
            u_grid=grid,
            func=lambda xi, u: -abs(lam) * (np.sum(xi**2, axis=-1) + np.sum(u**2, axis=-1)) + 0j,
        )
    kind, j = parse_field(which)
    if kind == "T":
        return WeylSymbol(
            u_grid=grid,
            func=lambda xi, u: np.full(np.broadcast_shapes(xi.shape[:-1], u.shape[:-1]), 1j * lam),
        )
    if j >= len(grid):
        raise ConfigurationException(f"{which} does not exist in dimension {len(grid)}")
    if kind == "X":
        return WeylSymbol(u_grid=grid, func=lambda xi, u: 1j * root * xi[..., j] + 0 * u[..., j])
    return WeylSymbol(u_grid=grid, func=lambda xi, u: 1j * signed * u[..., j] + 0 * xi[..., j])


# ---------------------------------------------------------------- pi_lambda(kappa)


def check_band(kappa: GridFunction, lam: float):
    t_grid = kappa.grid[-1]
    nyquist = math.pi / t_grid.spacing
    if abs(lam) > nyquist:
        raise LambdaBandException(data={"lambda": lam, "resolved": nyquist})


def euclidean_transform(kappa: GridFunction, frequencies: Sequence[np.ndarray]) -> np.ndarray:
    """int kappa(z) e^{-i z.zeta} dz on the tensor product of per-axis frequencies.

    Frequencies beyond an axis' Nyquist limit are set to zero instead of aliasing.
    """
    values = kappa.values
    for axis, (g, zeta) in enumerate(zip(kappa.grid, frequencies)):
        zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
        dft = np.exp(-1j * np.outer(zeta, g.nodes)) * g.spacing
        dft[np.abs(zeta) > math.pi / g.spacing] = 0
        values = np.moveaxis(np.tensordot(dft, values, axes=([1], [axis])), 0, axis)
    return values


def group_fourier_symbol(kappa: GridFunction, lam: float, u_grid: Grid) -> WeylSymbol:
    """Weyl symbol of pi_lambda(kappa) sampled on the dual of ``u_grid`` times ``u_grid``."""
    _check_lambda(lam)
    group_dim(kappa.grid)
    check_band(kappa, lam)
    root, signed = math.sqrt(abs(lam)), signed_sqrt(lam)
    xi_nodes = [g.dual().nodes for g in u_grid]
    frequencies = [root * xi for xi in xi_nodes] + [signed * g.nodes for g in u_grid] + [np.array([lam])]
    values = euclidean_transform(kappa, frequencies)[..., 0]
    return WeylSymbol(u_grid=u_grid, values=values)


def group_fourier(
    kappa: GridFunction, lam: float, u_grid: Optional[Grid] = None, dim: int = config.HERMITE_DIM
) -> tuple[WeylSymbol, RepOperator]:
    n = group_dim(kappa.grid)
    u_grid = u_grid or make_grid(n, config.QUANT_HALF_WIDTH, config.POINTS)
    symbol = group_fourier_symbol(kappa, lam, u_grid)
    return symbol, opw_matrix(symbol, dim, lam=lam)


def group_fourier_matrix(
    kappa: GridFunction, lam: float, dim: int = config.HERMITE_DIM, u_grid: Optional[Grid] = None
) -> RepOperator:
    """pi_lambda(kappa) = int kappa(g) pi_lambda(g)^* dg by quadrature on the group box.

    pi_lambda(g)^* h_k(u) = e^{-i lambda t} e^{i lambda x.y/2} e^{-i sqrt(lambda) y.u} h_k(u - sqrt|lambda| x)
    with the Hermite functions evaluated exactly at the shifted points.
    """
    _check_lambda(lam)
    n = group_dim(kappa.grid)
    check_band(kappa, lam)
    u_grid = u_grid or make_grid(n, config.QUANT_HALF_WIDTH, config.POINTS)
    root, signed = math.sqrt(abs(lam)), signed_sqrt(lam)
    x_grids, y_grids, t_grid = kappa.grid[:n], kappa.grid[n : 2 * n], kappa.grid[-1]

    reduced = np.tensordot(kappa.values, np.exp(-1j * lam * t_grid.nodes) * t_grid.spacing, axes=([-1], [0]))
    coords = mesh(tuple(x_grids) + tuple(y_grids))
    reduced = reduced * np.exp(0.5j * lam * np.sum(coords[..., :n] * coords[..., n:], axis=-1))

    # contract y_j against e^{-i sqrt(lambda) y_j u_j}: result axes (x_1..x_n, u_1..u_n)
    for j, (yg, ug) in enumerate(zip(y_grids, u_grid)):
        wave = np.exp(-1j * signed * np.outer(yg.nodes, ug.nodes)) * yg.spacing
        reduced = np.tensordot(reduced, wave, axes=([n], [0]))

    indices = hermite_indices(n, dim)
    shifted = [
        hermite_functions(ug.nodes[None, :] - root * xg.nodes[:, None], int(indices[:, j].max()) + 1)
        * xg.spacing
        for j, (xg, ug) in enumerate(zip(x_grids, u_grid))
    ]
    images = []
    for k in indices:
        image = reduced
        for j in range(n):
            image = _contract_x(image, shifted[j][k[j]], n)
        images.append(np.ravel(image))
    basis = basis_matrix(u_grid, dim)
    return RepOperator(lam=lam, dim=dim, matrix=basis.T @ np.stack(images, axis=1) * cell_volume(u_grid))


def _contract_x(image: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    """Sum the leading x axis against weights(x, u) on the matching u axis at position ``n``."""
    moved = np.moveaxis(image, n, 1)
    w = weights.reshape(weights.shape + (1,) * (moved.ndim - 2))
    return np.moveaxis(np.sum(moved * w, axis=0), 0, n - 1)


# ---------------------------------------------------------------- Plancherel


class PlancherelCalibration(BaseModel):
    constant: float
    reference: float
    spread: float
    per_function: list[float]
    tail_fraction: float
    closure_fraction: float
    truncation_delta: float


def hs_profile(
    kappa: GridFunction, lgrid: LambdaGrid, dim: int = config.HERMITE_DIM, u_grid: Optional[Grid] = None
) -> tuple[np.ndarray, np.ndarray]:
    """||pi_lambda(kappa)||_HS^2 at every node, at ``dim`` and at ``dim // 2``."""
    full, half = [], []
    for lam in lgrid.nodes:
        op = group_fourier_matrix(kappa, float(lam), dim, u_grid)
        full.append(hs_norm(op) ** 2)
        half.append(np.sum(np.abs(op.matrix[: dim // 2, : dim // 2]) ** 2))
    return np.array(full), np.array(half)


def plancherel_error(
    kappa: GridFunction, lgrid: LambdaGrid, constant: float, dim: int = config.HERMITE_DIM, u_grid: Optional[Grid] = None
) -> float:
    """Relative gap between ||kappa||^2 and c int ||pi_lambda(kappa)||_HS^2 |lambda|^n d lambda."""
    full, _ = hs_profile(kappa, lgrid, dim, u_grid)
    norm2 = kappa.l2_norm() ** 2
    return float(abs(constant * lgrid.integrate(full) - norm2) / norm2)


def calibrate_plancherel(
    test_functions: list[GridFunction],
    lgrid: LambdaGrid,
    dim: int = config.HERMITE_DIM,
    u_grid: Optional[Grid] = None,
    tolerances: Optional[dict] = None,
) -> PlancherelCalibration:
    tol = {**config.TOLERANCES, **(tolerances or {})}
    if len(test_functions) < 2:
        raise ConfigurationException("At least two test functions are required")
    stacked = np.stack([f.values.ravel() for f in test_functions])
    if np.linalg.matrix_rank(stacked, tol=1e-8 * np.max(np.abs(stacked))) < len(test_functions):
        raise ConfigurationException("Test functions must be linearly independent")

    constants, tails, closures, deltas = [], [], [], []
    for kappa in test_functions:
        full, half = hs_profile(kappa, lgrid, dim, u_grid)
        integral = float(np.real(lgrid.integrate(full)))
        delta = abs(integral - float(np.real(lgrid.integrate(half)))) / integral
        if delta > tol["truncation"]:
            raise TruncationException(data={"relative_change": delta, "dim": dim})
        tails.append(lgrid.check_tail(full, tol["tail"]))
        closures.append(lgrid.closure_fraction(full))
        deltas.append(delta)
        constants.append(kappa.l2_norm() ** 2 / integral)

    constant = float(np.mean(constants))
    spread = float((max(constants) - min(constants)) / constant)
    logger.info("calibrate_plancherel: c_n=%.6g spread=%.3e", constant, spread)
    if spread > tol["plancherel_spread"]:
        raise CalibrationException(data={"constants": constants, "spread": spread})
    return PlancherelCalibration(
        constant=constant,
        reference=reference_plancherel_constant(lgrid.n),
        spread=spread,
        per_function=constants,
        tail_fraction=max(tails),
        closure_fraction=max(closures),
        truncation_delta=max(deltas),
    )
