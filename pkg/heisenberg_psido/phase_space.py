"""Discretisation of L^2(R^n) and of phase space.

Weyl quantisation on a uniform midpoint grid, the Hermite basis that
diagonalises the harmonic oscillator, and the spectral helpers (traces,
Hilbert-Schmidt norms, fractional powers of the oscillator) built on it.
"""
import itertools
import logging
import math
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy import fft as sfft
from scipy.interpolate import make_interp_spline

from heisenberg_psido.exceptions import AliasingException, GridMismatchException

logger = logging.getLogger(__name__)

# symbol closure: (xi, u) with trailing axis n -> complex array
SymbolFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Grid1D(BaseModel):
    half_width: float
    points: int

    class Config:
        allow_mutation = False

    @validator("half_width")
    def validate_half_width(cls, v, values, **kwargs):
        assert v > 0, "Half width must be positive"
        return float(v)

    @validator("points")
    def validate_points(cls, v, values, **kwargs):
        assert v >= 8, "At least 8 points are required"
        assert v % 2 == 0, "Number of points must be even"
        return v

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.points) + 0.5) * self.spacing

    def dual(self) -> "Grid1D":
        """Frequency grid covering [-pi/h, pi/h] with the same number of nodes."""
        return Grid1D(half_width=math.pi / self.spacing, points=self.points)


Grid = tuple[Grid1D, ...]


def make_grid(dim: int, half_width: float, points: int) -> Grid:
    return tuple(Grid1D(half_width=half_width, points=points) for _ in range(dim))


def grid_shape(grid: Grid) -> tuple[int, ...]:
    return tuple(g.points for g in grid)


def cell_volume(grid: Grid) -> float:
    return float(np.prod([g.spacing for g in grid]))


def mesh(grid: Grid) -> np.ndarray:
    """Node coordinates with shape (M_1, ..., M_k, k)."""
    return np.stack(np.meshgrid(*[g.nodes for g in grid], indexing="ij"), axis=-1)


class GridFunction(BaseModel):
    grid: Grid
    values: np.ndarray

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("values")
    def validate_shape(cls, v, values, **kwargs):
        grid = values.get("grid")
        v = np.asarray(v, dtype=complex)
        if grid is not None:
            assert v.shape == grid_shape(grid), "Value array does not match the grid"
        return v

    @property
    def dim(self) -> int:
        return len(self.grid)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * cell_volume(self.grid)))

    def inner(self, other: "GridFunction") -> complex:
        check_same_grid(self.grid, other.grid)
        return complex(np.sum(np.conj(self.values) * other.values) * cell_volume(self.grid))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(grid=self.grid, values=values)


def sample(grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    """Sample ``func`` (points with trailing coordinate axis) on the grid."""
    return GridFunction(grid=grid, values=np.asarray(func(mesh(grid)), dtype=complex))


def check_same_grid(left: Grid, right: Grid):
    if tuple(left) != tuple(right):
        raise GridMismatchException(
            data={"left": [g.dict() for g in left], "right": [g.dict() for g in right]}
        )


class WeylSymbol(BaseModel):
    """Symbol a(xi, u) on phase space.

    Either a closure ``func(xi, u)`` (sampled analytically wherever the
    kernel needs it) or ``values`` sampled on the dual grid times ``u_grid``.
    """

    u_grid: Grid
    func: Optional[SymbolFunc] = None
    values: Optional[np.ndarray] = None

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("values")
    def validate_values(cls, v, values, **kwargs):
        if v is None:
            return v
        v = np.asarray(v, dtype=complex)
        grid = values.get("u_grid")
        if grid is not None:
            assert v.shape == grid_shape(grid) * 2, "Samples must cover xi x u nodes"
        assert np.all(np.isfinite(v)), "Symbol must be finite"
        return v

    @property
    def dim(self) -> int:
        return len(self.u_grid)

    @property
    def xi_grid(self) -> Grid:
        return tuple(g.dual() for g in self.u_grid)

    def sampled(self) -> np.ndarray:
        if self.values is not None:
            return self.values
        xi = mesh(self.xi_grid)
        u = mesh(self.u_grid)
        n = self.dim
        xi_b = xi.reshape(xi.shape[:-1] + (1,) * n + (n,))
        u_b = u.reshape((1,) * n + u.shape)
        out = self.func(xi_b, u_b)
        return np.broadcast_to(out, grid_shape(self.xi_grid) + grid_shape(self.u_grid))


class RepOperator(BaseModel):
    lam: Optional[float] = None
    dim: int
    matrix: np.ndarray

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("matrix")
    def validate_matrix(cls, v, values, **kwargs):
        v = np.asarray(v, dtype=complex)
        dim = values.get("dim")
        assert v.shape == (dim, dim), "Matrix must be dim x dim"
        assert np.all(np.isfinite(v)), "Matrix must be finite"
        return v

    def adjoint(self) -> "RepOperator":
        return RepOperator(lam=self.lam, dim=self.dim, matrix=self.matrix.conj().T)

    def __matmul__(self, other: "RepOperator") -> "RepOperator":
        return RepOperator(lam=self.lam, dim=self.dim, matrix=self.matrix @ other.matrix)


# ---------------------------------------------------------------- Hermite


def hermite_indices(n: int, dim: int) -> np.ndarray:
    """First ``dim`` multi-indices in N^n, by total degree then lexicographically."""
    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < dim:
        layer = [k for k in itertools.product(range(degree + 1), repeat=n) if sum(k) == degree]
        out.extend(sorted(layer, reverse=True))
        degree += 1
    return np.array(out[:dim], dtype=int).reshape(dim, n)


def hermite_functions(u: np.ndarray, count: int) -> np.ndarray:
    """Normalised Hermite functions h_0..h_{count-1} at ``u``; shape (count, *u.shape)."""
    u = np.asarray(u, dtype=float)
    out = np.empty((count,) + u.shape)
    out[0] = math.pi ** -0.25 * np.exp(-(u**2) / 2)
    if count > 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for k in range(1, count - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def _check_aliasing(grid: Grid, indices: np.ndarray):
    for axis, g in enumerate(grid):
        top = int(indices[:, axis].max()) + 1
        if top > g.points // 2:
            raise AliasingException(
                data={"axis": axis, "degrees": top, "points": g.points},
            )


def basis_matrix(grid: Grid, dim: int) -> np.ndarray:
    """Hermite basis sampled on the grid, columns flattened row-major: (prod M, dim)."""
    n = len(grid)
    indices = hermite_indices(n, dim)
    _check_aliasing(grid, indices)
    per_axis = [hermite_functions(g.nodes, int(indices[:, a].max()) + 1) for a, g in enumerate(grid)]
    columns = []
    for k in indices:
        column = per_axis[0][k[0]]
        for a in range(1, n):
            column = np.multiply.outer(column, per_axis[a][k[a]])
        columns.append(np.ravel(column))
    return np.stack(columns, axis=1)


def hermite_basis(grid: Grid, dim: int) -> list[GridFunction]:
    basis = basis_matrix(grid, dim)
    shape = grid_shape(grid)
    return [GridFunction(grid=grid, values=basis[:, k].reshape(shape)) for k in range(dim)]


def gram_matrix(grid: Grid, dim: int) -> np.ndarray:
    basis = basis_matrix(grid, dim)
    return basis.T @ basis * cell_volume(grid)


# ---------------------------------------------------------------- Weyl


def _half_nodes(g: Grid1D) -> np.ndarray:
    """Midpoints (u_i + u_j)/2, indexed by s = i + j."""
    return -g.half_width + (np.arange(2 * g.points - 1) / 2 + 0.5) * g.spacing


def _midpoint_samples(a: WeylSymbol) -> np.ndarray:
    """Symbol at (midpoint_s, xi_k): shape (S_1..S_n, M_1..M_n)."""
    n = a.dim
    if a.func is not None:
        xi = mesh(a.xi_grid)
        mids = np.stack(np.meshgrid(*[_half_nodes(g) for g in a.u_grid], indexing="ij"), axis=-1)
        xi_b = xi.reshape((1,) * n + xi.shape)
        mids_b = mids.reshape(mids.shape[:-1] + (1,) * n + (n,))
        out = a.func(xi_b, mids_b)
        return np.broadcast_to(out, mids.shape[:-1] + xi.shape[:-1]).astype(complex)

    samples = a.values
    for axis, g in enumerate(a.u_grid):
        spline = make_interp_spline(g.nodes, samples, k=3, axis=n + axis)
        samples = spline(_half_nodes(g))
    return np.moveaxis(samples, list(range(n, 2 * n)), list(range(n)))


def weyl_kernel(a: WeylSymbol) -> np.ndarray:
    """Matrix K with Op^W(a) f = K @ f.ravel() on the u-grid.

    The xi-sum for every midpoint is an inverse FFT; offsets d = i - j
    outside [0, M) follow from the antiperiodicity of the half-shifted
    frequency nodes.
    """
    n = a.dim
    shape = grid_shape(a.u_grid)
    samples = _midpoint_samples(a)
    xi_axes = tuple(range(n, 2 * n))
    kernel = sfft.ifftn(samples, axes=xi_axes) * np.prod(shape)
    for axis, g in enumerate(a.u_grid):
        m = g.points
        d = np.arange(m)
        phase = np.exp(1j * math.pi * d * (1 - m) / m) * (g.dual().spacing / (2 * math.pi)) * g.spacing
        bshape = [1] * (2 * n)
        bshape[n + axis] = m
        kernel = kernel * phase.reshape(bshape)
        negative = -np.take(kernel, np.arange(1, m), axis=n + axis)
        kernel = np.concatenate([negative, kernel], axis=n + axis)

    idx = np.indices(shape + shape)
    rows, cols = idx[:n], idx[n:]
    s = tuple(rows[a_] + cols[a_] for a_ in range(n))
    d = tuple(rows[a_] - cols[a_] + shape[a_] - 1 for a_ in range(n))
    size = int(np.prod(shape))
    return kernel[s + d].reshape(size, size)


def opw_apply(a: WeylSymbol, f: GridFunction) -> GridFunction:
    check_same_grid(a.u_grid, f.grid)
    out = weyl_kernel(a) @ f.values.ravel()
    return f.with_values(out.reshape(f.values.shape))


def opw_matrix(a: WeylSymbol, dim: int, lam: Optional[float] = None) -> RepOperator:
    basis = basis_matrix(a.u_grid, dim)
    projected = basis.T @ (weyl_kernel(a) @ basis) * cell_volume(a.u_grid)
    return RepOperator(lam=lam, dim=dim, matrix=projected)


def constant_symbol(grid: Grid, value: complex = 1.0) -> WeylSymbol:
    return WeylSymbol(u_grid=grid, func=lambda xi, u: np.full(np.broadcast_shapes(xi.shape[:-1], u.shape[:-1]), value, dtype=complex))


# ---------------------------------------------------------------- spectra


def trace(op: RepOperator) -> complex:
    return complex(np.trace(op.matrix))


def hs_norm(op: RepOperator) -> float:
    return float(np.sqrt(np.sum(np.abs(op.matrix) ** 2)))


def oscillator_spectrum(lam: float, n: int, dim: int) -> np.ndarray:
    """Eigenvalues of pi_lambda(I - L) on the Hermite basis."""
    degrees = hermite_indices(n, dim).sum(axis=1)
    return 1.0 + abs(lam) * (2 * degrees + n)


def sandwich_power(op: RepOperator, s_left: float, s_right: float, n: int = 1) -> RepOperator:
    """D^{s_left} op D^{s_right}, D the diagonal of pi_lambda(I - L)."""
    if op.lam is None:
        raise GridMismatchException("Operator carries no lambda")
    weights = oscillator_spectrum(op.lam, n, op.dim)
    matrix = (weights**s_left)[:, None] * op.matrix * (weights**s_right)[None, :]
    return RepOperator(lam=op.lam, dim=op.dim, matrix=matrix)


# ---------------------------------------------------------------- Fourier


def fourier_transform(f: GridFunction) -> GridFunction:
    """(2 pi)^{-N/2} int f(x) e^{-i x xi} dx on the dual grid."""
    values = f.values
    for axis, g in enumerate(f.grid):
        dft = np.exp(-1j * np.outer(g.dual().nodes, g.nodes)) * g.spacing / math.sqrt(2 * math.pi)
        values = np.moveaxis(np.tensordot(dft, values, axes=([1], [axis])), 0, axis)
    return GridFunction(grid=tuple(g.dual() for g in f.grid), values=values)
