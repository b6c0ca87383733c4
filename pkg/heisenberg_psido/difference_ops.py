"""Difference operators on lambda-families of Weyl symbols.

With the renormalisation a(lambda, xi, u) = b(lambda, sqrt|lambda| xi, sqrt(lambda) u)

    Delta_{x_j} a = i d b / d xi_j,  Delta_{y_j} a = i d b / d u_j,  Delta_t a = i d b / d lambda,

all evaluated at (lambda, sqrt|lambda| xi, sqrt(lambda) u). The three commute, so a
SymbolFamily only records how often each slot is differentiated and evaluates
the mixed partial with a single product stencil.
"""
import itertools
import logging
import math
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy.interpolate import RegularGridInterpolator

from heisenberg_psido import config
from heisenberg_psido.exceptions import ConfigurationException, LambdaBandException, NonSmoothSymbolException
from heisenberg_psido.heisenberg import MultiIndex
from heisenberg_psido.phase_space import Grid, RepOperator, WeylSymbol, hermite_indices

logger = logging.getLogger(__name__)

# (lambda, xi, u) -> complex; xi and u carry a trailing axis of length n
FamilyFunc = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------- stencils


@lru_cache(maxsize=None)
def stencil(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Central offsets and weights of a fourth order accurate ``order``-th derivative."""
    half = (order + 1) // 2 + 1
    offsets = np.arange(-half, half + 1, dtype=float)
    vandermonde = offsets[None, :] ** np.arange(len(offsets))[:, None]
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return offsets, np.linalg.solve(vandermonde, rhs)


def step_size(order: int) -> float:
    return _EPS ** (1.0 / (order + 4))


def _stencil_sum(func, orders, scales, spread):
    """Stencil value and the magnitude sum |w| |f| / h^k that bounds its roundoff."""
    active = [i for i, k in enumerate(orders) if k > 0]
    steps = {i: spread * step_size(orders[i]) * scales[i] for i in active}
    total = 0
    magnitude = 0
    for picks in itertools.product(*[zip(*stencil(orders[i])) for i in active]):
        deltas = [0.0] * len(orders)
        weight = 1.0
        for i, (offset, w) in zip(active, picks):
            if w == 0:
                weight = 0.0
                break
            deltas[i] = offset * steps[i]
            weight *= w
        if weight == 0.0:
            continue
        value = func(deltas)
        total = total + weight * value
        magnitude = magnitude + abs(weight) * np.abs(value)
    for i in active:
        total = total / steps[i] ** orders[i]
        magnitude = magnitude / steps[i] ** orders[i]
    return total, magnitude


def stencil_gain(orders: list[int], scales: Optional[list] = None) -> float:
    """prod_i sum|w_i| / h_i^k_i, the factor by which a stencil amplifies input errors."""
    gain = 1.0
    for i, k in enumerate(orders):
        if k > 0:
            scale = 1.0 if scales is None else scales[i]
            gain = gain * np.sum(np.abs(stencil(k)[1])) / (step_size(k) * scale) ** k
    return gain


def mixed_partial(
    func: Callable[[list], np.ndarray],
    orders: list[int],
    scales: list,
    check: bool = True,
    tol: Optional[float] = None,
    with_roundoff: bool = False,
):
    """Mixed partial of ``func(deltas)`` at deltas = 0, one axis per entry of ``orders``.

    ``scales`` sets the step of each axis (scalar or array broadcasting with
    the output). With ``check`` the result is compared against the stencil at
    twice the step and inconsistent values raise; differences within the
    roundoff of the two stencils are accepted. ``with_roundoff`` also returns
    the pointwise roundoff estimate eps * sum|w| |f| / h^k.
    """
    if not any(orders):
        value = func([0.0] * len(orders))
        return (value, _EPS * np.abs(value)) if with_roundoff else value
    fine, magnitude = _stencil_sum(func, orders, scales, 1.0)
    roundoff = _EPS * magnitude
    if check:
        tol = config.TOLERANCES["smoothness"] if tol is None else tol
        coarse, coarse_magnitude = _stencil_sum(func, orders, scales, 2.0)
        gap = np.abs(fine - coarse)
        size = max(1.0, float(np.max(np.abs(fine))) if np.size(fine) else 0.0)
        noise = config.ROUNDOFF_FACTOR * (roundoff + _EPS * coarse_magnitude)
        if not np.all(np.isfinite(fine)) or np.any(gap > tol * size + noise):
            excess = gap - noise
            raise NonSmoothSymbolException(
                data={
                    "orders": list(orders),
                    "gap": float(np.max(gap)) if np.size(gap) else 0.0,
                    "excess": float(np.max(excess)) if np.size(excess) else 0.0,
                    "size": size,
                }
            )
    return (fine, roundoff) if with_roundoff else fine


# ---------------------------------------------------------------- families


def _signed_root(lam):
    return np.sign(lam) * np.sqrt(np.abs(lam))


class SymbolFamily(BaseModel):
    n: int
    evaluator: FamilyFunc
    lambda_band: tuple[float, float] = (0.0, math.inf)
    xi_orders: tuple[int, ...] = ()
    u_orders: tuple[int, ...] = ()
    lam_order: int = 0
    factor: complex = 1 + 0j
    check_smoothness: bool = True

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("xi_orders", "u_orders", always=True)
    def validate_orders(cls, v, values, **kwargs):
        n = values.get("n")
        if not v:
            return (0,) * n
        assert len(v) == n and all(k >= 0 for k in v), "One nonnegative order per coordinate"
        return tuple(v)

    @validator("lambda_band")
    def validate_band(cls, v, values, **kwargs):
        assert 0 <= v[0] < v[1], "Band must satisfy 0 <= low < high"
        return v

    @property
    def orders(self) -> tuple[int, ...]:
        return self.xi_orders + self.u_orders + (self.lam_order,)

    def _check_band(self, lam: np.ndarray, margin: float = 0.0):
        low, high = self.lambda_band
        mag = np.abs(lam)
        if np.any(mag == 0) or np.any(mag * (1 - margin) < low) or np.any(mag * (1 + margin) > high):
            raise LambdaBandException(
                data={"band": list(self.lambda_band), "lambda_range": [float(mag.min()), float(mag.max())]}
            )

    def __call__(self, lam, xi, u) -> np.ndarray:
        return self.value_and_roundoff(lam, xi, u)[0]

    def value_and_roundoff(self, lam, xi, u) -> tuple[np.ndarray, np.ndarray]:
        """Family values with a pointwise estimate of their floating point error."""
        lam = np.asarray(lam, dtype=float)
        xi = np.asarray(xi, dtype=float)
        u = np.asarray(u, dtype=float)
        if not any(self.orders):
            self._check_band(lam)
            value = np.asarray(self.evaluator(lam, xi, u), dtype=complex)
            return self.factor * value, abs(self.factor) * _EPS * np.abs(value)

        n = self.n
        margin = 0.0
        if self.lam_order:
            offsets, _ = stencil(self.lam_order)
            margin = 2 * offsets.max() * step_size(self.lam_order)
        self._check_band(lam, margin)

        shape = np.broadcast_shapes(lam.shape, xi.shape[:-1], u.shape[:-1])
        lam_b = np.broadcast_to(lam, shape)
        xi_r = np.broadcast_to(np.sqrt(np.abs(lam))[..., None] * xi, shape + (n,))
        u_r = np.broadcast_to(_signed_root(lam)[..., None] * u, shape + (n,))

        def renormalized(deltas):
            lam2 = lam_b + deltas[2 * n]
            xi2 = np.stack([xi_r[..., j] + deltas[j] for j in range(n)], axis=-1)
            u2 = np.stack([u_r[..., j] + deltas[n + j] for j in range(n)], axis=-1)
            xi2 = xi2 / np.sqrt(np.abs(lam2))[..., None]
            u2 = u2 / _signed_root(lam2)[..., None]
            return np.asarray(self.evaluator(lam2, xi2, u2), dtype=complex)

        scales = (
            [np.maximum(1.0, np.abs(xi_r[..., j])) for j in range(n)]
            + [np.maximum(1.0, np.abs(u_r[..., j])) for j in range(n)]
            + [np.abs(lam_b)]
        )
        value, roundoff = mixed_partial(
            renormalized, list(self.orders), scales, check=self.check_smoothness, with_roundoff=True
        )
        return self.factor * value, abs(self.factor) * roundoff

    def weyl_symbol(self, lam: float, grid: Grid) -> WeylSymbol:
        return WeylSymbol(u_grid=grid, func=lambda xi, u: self(lam, xi, u))

    def scaled(self, factor: complex) -> "SymbolFamily":
        return self.copy(update={"factor": self.factor * factor})

    @classmethod
    def from_samples(
        cls, lams: np.ndarray, xi_nodes: list[np.ndarray], u_nodes: list[np.ndarray], values: np.ndarray
    ) -> "SymbolFamily":
        """Family interpolated (tensor cubic) from samples on lambda x xi x u nodes."""
        n = len(xi_nodes)
        lams = np.asarray(lams, dtype=float)
        if np.any(lams <= 0) and np.any(lams >= 0):
            raise ConfigurationException("Sampled families live on one sign of lambda")
        axes = [lams] + list(xi_nodes) + list(u_nodes)
        real = RegularGridInterpolator(axes, np.real(values), method="cubic", bounds_error=False, fill_value=None)
        imag = RegularGridInterpolator(axes, np.imag(values), method="cubic", bounds_error=False, fill_value=None)

        def evaluator(lam, xi, u):
            shape = np.broadcast_shapes(np.shape(lam), xi.shape[:-1], u.shape[:-1])
            points = np.concatenate(
                [
                    np.broadcast_to(np.asarray(lam)[..., None], shape + (1,)),
                    np.broadcast_to(xi, shape + (n,)),
                    np.broadcast_to(u, shape + (n,)),
                ],
                axis=-1,
            )
            return real(points) + 1j * imag(points)

        band = (float(np.min(np.abs(lams))), float(np.max(np.abs(lams))))
        return cls(n=n, evaluator=evaluator, lambda_band=band)

    @classmethod
    def from_renormalized(cls, a: WeylSymbol) -> "SymbolFamily":
        """a(lambda, xi, u) = b(sqrt|lambda| xi, sqrt(lambda) u) for a sampled b; zero outside its box."""
        n = a.dim
        axes = [g.nodes for g in a.xi_grid] + [g.nodes for g in a.u_grid]
        values = a.sampled()
        real = RegularGridInterpolator(axes, np.real(values), method="cubic", bounds_error=False, fill_value=0.0)
        imag = RegularGridInterpolator(axes, np.imag(values), method="cubic", bounds_error=False, fill_value=0.0)

        def evaluator(lam, xi, u):
            lam = np.asarray(lam, dtype=float)
            shape = np.broadcast_shapes(lam.shape, xi.shape[:-1], u.shape[:-1])
            points = np.concatenate(
                [
                    np.broadcast_to(np.sqrt(np.abs(lam))[..., None] * xi, shape + (n,)),
                    np.broadcast_to(_signed_root(lam)[..., None] * u, shape + (n,)),
                ],
                axis=-1,
            )
            return real(points) + 1j * imag(points)

        return cls(n=n, evaluator=evaluator, check_smoothness=False)


def _bump(orders: tuple[int, ...], j: int) -> tuple[int, ...]:
    if not 0 <= j < len(orders):
        raise ConfigurationException(f"Coordinate index {j + 1} out of range")
    return orders[:j] + (orders[j] + 1,) + orders[j + 1 :]


def delta_x(j: int, fam: SymbolFamily) -> SymbolFamily:
    """(i / sqrt|lambda|) d/dxi_j; ``j`` counts from 1."""
    return fam.copy(update={"xi_orders": _bump(fam.xi_orders, j - 1), "factor": fam.factor * 1j})


def delta_y(j: int, fam: SymbolFamily) -> SymbolFamily:
    """(i / sqrt(lambda)) d/du_j with the signed root."""
    return fam.copy(update={"u_orders": _bump(fam.u_orders, j - 1), "factor": fam.factor * 1j})


def tilde_partial(fam: SymbolFamily) -> SymbolFamily:
    """d/dlambda - (1/2 lambda) sum_j (u_j d/du_j + xi_j d/dxi_j)."""
    return fam.copy(update={"lam_order": fam.lam_order + 1})


def delta_t(fam: SymbolFamily) -> SymbolFamily:
    return fam.copy(update={"lam_order": fam.lam_order + 1, "factor": fam.factor * 1j})


def delta_power(alpha: MultiIndex, fam: SymbolFamily) -> SymbolFamily:
    """Delta_x^{alpha1} Delta_y^{alpha2} Delta_t^{alpha3}; Delta_t acts first."""
    if len(alpha.alpha1) != fam.n or len(alpha.alpha2) != fam.n:
        raise ConfigurationException("Multi-index dimension does not match the family")
    out = fam
    for _ in range(alpha.alpha3):
        out = delta_t(out)
    for j, k in enumerate(alpha.alpha2):
        for _ in range(k):
            out = delta_y(j + 1, out)
    for j, k in enumerate(alpha.alpha1):
        for _ in range(k):
            out = delta_x(j + 1, out)
    return out


def renormalize(fam: SymbolFamily) -> SymbolFamily:
    """b(lambda, xi, u) = a(lambda, xi / sqrt|lambda|, u / sqrt(lambda))."""

    def evaluator(lam, xi, u):
        lam = np.asarray(lam, dtype=float)
        return fam(lam, xi / np.sqrt(np.abs(lam))[..., None], u / _signed_root(lam)[..., None])

    return SymbolFamily(n=fam.n, evaluator=evaluator, lambda_band=fam.lambda_band, check_smoothness=fam.check_smoothness)


def derenormalize(fam: SymbolFamily) -> SymbolFamily:
    """a(lambda, xi, u) = b(lambda, sqrt|lambda| xi, sqrt(lambda) u)."""

    def evaluator(lam, xi, u):
        lam = np.asarray(lam, dtype=float)
        return fam(lam, np.sqrt(np.abs(lam))[..., None] * xi, _signed_root(lam)[..., None] * u)

    return SymbolFamily(n=fam.n, evaluator=evaluator, lambda_band=fam.lambda_band, check_smoothness=fam.check_smoothness)


def plain_partial(fam: SymbolFamily, axis: int, lam, xi, u) -> np.ndarray:
    """Ordinary first partial of the family in slot ``axis`` of (xi_1..xi_n, u_1..u_n, lambda)."""
    lam = np.asarray(lam, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    n = fam.n

    def shifted(deltas):
        lam2 = lam + deltas[2 * n]
        xi2 = np.stack([xi[..., j] + deltas[j] for j in range(n)], axis=-1)
        u2 = np.stack([u[..., j] + deltas[n + j] for j in range(n)], axis=-1)
        return fam(lam2, xi2, u2)

    orders = [0] * (2 * n + 1)
    orders[axis] = 1
    scales = [1.0] * (2 * n + 1)
    if axis == 2 * n:
        scales[axis] = np.abs(lam)
    else:
        coords = xi[..., axis] if axis < n else u[..., axis - n]
        scales[axis] = np.maximum(1.0, np.abs(coords))
    return mixed_partial(shifted, orders, scales, check=fam.check_smoothness)


def tilde_partial_literal(fam: SymbolFamily, lam, xi, u) -> np.ndarray:
    """The first order operator evaluated term by term in the original coordinates."""
    lam = np.asarray(lam, dtype=float)
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    n = fam.n
    total = plain_partial(fam, 2 * n, lam, xi, u)
    for j in range(n):
        radial = xi[..., j] * plain_partial(fam, j, lam, xi, u) + u[..., j] * plain_partial(fam, n + j, lam, xi, u)
        total = total - radial / (2 * lam)
    return total


# ---------------------------------------------------------------- commutator form


def _ladder(n: int, dim: int, axis: int) -> np.ndarray:
    """Annihilation operator a_axis on the first ``dim`` Hermite functions."""
    indices = hermite_indices(n, dim)
    lookup = {tuple(k): row for row, k in enumerate(indices)}
    out = np.zeros((dim, dim))
    for col, k in enumerate(indices):
        if k[axis] == 0:
            continue
        lower = tuple(k[:axis]) + (k[axis] - 1,) + tuple(k[axis + 1 :])
        row = lookup.get(lower)
        if row is not None:
            out[row, col] = math.sqrt(k[axis])
    return out


def position_matrix(n: int, dim: int, axis: int) -> np.ndarray:
    a = _ladder(n, dim, axis)
    return (a + a.T) / math.sqrt(2)


def derivative_matrix(n: int, dim: int, axis: int) -> np.ndarray:
    a = _ladder(n, dim, axis)
    return (a - a.T) / math.sqrt(2)


def difference_by_commutator(which: str, j: int, op: RepOperator, n: int = 1) -> RepOperator:
    """Delta_{x_j} = ad(u_j) / sqrt|lambda| and Delta_{y_j} = -ad(d/du_j) / (i sqrt(lambda)).

    Only the block of degrees below the truncation edge is meaningful.
    """
    lam = op.lam
    if lam is None or lam == 0:
        raise ConfigurationException("Operator carries no lambda")
    if which == "x":
        generator = position_matrix(n, op.dim, j - 1)
        scale = 1 / math.sqrt(abs(lam))
    elif which == "y":
        generator = derivative_matrix(n, op.dim, j - 1)
        scale = -1 / (1j * math.copysign(math.sqrt(abs(lam)), lam))
    else:
        raise ConfigurationException(f"Unknown difference operator {which}")
    commutator = generator @ op.matrix - op.matrix @ generator
    return RepOperator(lam=lam, dim=op.dim, matrix=scale * commutator)
