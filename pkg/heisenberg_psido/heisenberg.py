"""The Heisenberg group H_n: group law, dilations and left-invariant fields."""
import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy import ndimage

from heisenberg_psido import config
from heisenberg_psido.exceptions import ConfigurationException, GridMarginException
from heisenberg_psido.phase_space import Grid, Grid1D, GridFunction, mesh

logger = logging.getLogger(__name__)

# fourth order central first derivative, offsets -2..2
_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


class HPoint(BaseModel):
    x: tuple[float, ...]
    y: tuple[float, ...]
    t: float = 0.0

    class Config:
        allow_mutation = False

    @validator("y")
    def validate_dims(cls, v, values, **kwargs):
        x = values.get("x")
        assert x is None or len(x) == len(v), "x and y must have the same length"
        assert np.all(np.isfinite(v)), "Coordinates must be finite"
        return v

    @property
    def n(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array(self.x + self.y + (self.t,), dtype=float)

    @classmethod
    def from_array(cls, g: np.ndarray) -> "HPoint":
        g = np.asarray(g, dtype=float)
        n = (g.shape[-1] - 1) // 2
        return cls(x=tuple(g[:n]), y=tuple(g[n : 2 * n]), t=float(g[-1]))

    @classmethod
    def identity(cls, n: int) -> "HPoint":
        return cls(x=(0.0,) * n, y=(0.0,) * n, t=0.0)


class MultiIndex(BaseModel):
    alpha1: tuple[int, ...]
    alpha2: tuple[int, ...]
    alpha3: int = 0

    class Config:
        allow_mutation = False

    @validator("alpha1", "alpha2", each_item=True)
    def validate_entries(cls, v, values, **kwargs):
        assert v >= 0, "Indices must be nonnegative"
        return v

    @validator("alpha3")
    def validate_alpha3(cls, v, values, **kwargs):
        assert v >= 0, "Indices must be nonnegative"
        return v

    @property
    def degree(self) -> int:
        """Homogeneous degree |alpha1| + |alpha2| + 2 alpha3."""
        return sum(self.alpha1) + sum(self.alpha2) + 2 * self.alpha3

    @property
    def length(self) -> int:
        return sum(self.alpha1) + sum(self.alpha2) + self.alpha3

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls(alpha1=(0,) * n, alpha2=(0,) * n, alpha3=0)


def group_mul_arrays(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Group law on arrays with trailing coordinate axis of length 2n+1."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    n = (g.shape[-1] - 1) // 2
    x, y, t = g[..., :n], g[..., n : 2 * n], g[..., -1]
    x2, y2, t2 = h[..., :n], h[..., n : 2 * n], h[..., -1]
    twist = 0.5 * (np.sum(x * y2, axis=-1) - np.sum(x2 * y, axis=-1))
    return np.concatenate([x + x2, y + y2, (t + t2 + twist)[..., None]], axis=-1)


def group_mul(g: HPoint, h: HPoint) -> HPoint:
    return HPoint.from_array(group_mul_arrays(g.as_array(), h.as_array()))


def inverse(g: HPoint) -> HPoint:
    return HPoint.from_array(-g.as_array())


def dilate_arrays(r: float, g: np.ndarray) -> np.ndarray:
    if r <= 0:
        raise ConfigurationException("Dilation factor must be positive", data={"r": r})
    g = np.asarray(g, dtype=float)
    scale = np.full(g.shape[-1], r)
    scale[-1] = r * r
    return g * scale


def dilate(r: float, g: HPoint) -> HPoint:
    return HPoint.from_array(dilate_arrays(r, g.as_array()))


def group_grid(n: int, half_width: float, points: int, centre_half_width: float, centre_points: int) -> Grid:
    """Box [-B, B]^{2n} x [-B_t, B_t]."""
    plane = Grid1D(half_width=half_width, points=points)
    centre = Grid1D(half_width=centre_half_width, points=centre_points)
    return (plane,) * (2 * n) + (centre,)


def group_dim(grid: Grid) -> int:
    k = len(grid)
    if k % 2 == 0:
        raise ConfigurationException("Functions on H_n need 2n+1 axes", data={"axes": k})
    return (k - 1) // 2


def _partial(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    weights = _STENCIL / spacing
    real = ndimage.correlate1d(values.real, weights, axis=axis, mode="constant")
    imag = ndimage.correlate1d(values.imag, weights, axis=axis, mode="constant")
    return real + 1j * imag


def _check_margin(f: GridFunction, margin_tol: float):
    peak = np.max(np.abs(f.values))
    if peak == 0:
        return
    for axis in range(f.dim):
        edges = np.concatenate(
            [np.take(f.values, [0, 1], axis=axis).ravel(), np.take(f.values, [-2, -1], axis=axis).ravel()]
        )
        if np.max(np.abs(edges)) > margin_tol * peak:
            raise GridMarginException(data={"axis": axis, "edge_ratio": float(np.max(np.abs(edges)) / peak)})


def parse_field(which: str) -> tuple[str, int]:
    """'X1' -> ('X', 0); 'T' -> ('T', 0)."""
    kind = which[0].upper()
    if kind not in "XYT":
        raise ConfigurationException(f"Unknown vector field {which}")
    index = int(which[1:]) - 1 if len(which) > 1 else 0
    return kind, index


def vector_field_apply(which: str, f: GridFunction, margin_tol: Optional[float] = None) -> GridFunction:
    """X_j = d/dx_j - y_j/2 d/dt, Y_j = d/dy_j + x_j/2 d/dt, T = d/dt.

    The two outermost layers of each axis are only valid when ``f``
    vanishes there: values above ``margin_tol`` times the peak raise.
    Pass ``margin_tol=math.inf`` to accept invalid outer layers.
    """
    n = group_dim(f.grid)
    _check_margin(f, config.TOLERANCES["margin"] if margin_tol is None else margin_tol)
    kind, j = parse_field(which)
    if j >= n:
        raise ConfigurationException(f"{which} does not exist on H_{n}")
    t_axis = 2 * n
    dt = _partial(f.values, t_axis, f.grid[t_axis].spacing)
    if kind == "T":
        return f.with_values(dt)
    coords = mesh(f.grid)
    if kind == "X":
        out = _partial(f.values, j, f.grid[j].spacing) - 0.5 * coords[..., n + j] * dt
    else:
        out = _partial(f.values, n + j, f.grid[n + j].spacing) + 0.5 * coords[..., j] * dt
    return f.with_values(out)


def apply_word(word: MultiIndex, f: GridFunction, margin_tol: Optional[float] = None) -> GridFunction:
    """X^word = X^{alpha1} Y^{alpha2} T^{alpha3}; the rightmost factor acts first."""
    out = f
    for _ in range(word.alpha3):
        out = vector_field_apply("T", out, margin_tol)
    for j in reversed(range(len(word.alpha2))):
        for _ in range(word.alpha2[j]):
            out = vector_field_apply(f"Y{j + 1}", out, margin_tol)
    for j in reversed(range(len(word.alpha1))):
        for _ in range(word.alpha1[j]):
            out = vector_field_apply(f"X{j + 1}", out, margin_tol)
    return out


def sublaplacian_apply(f: GridFunction, margin_tol: Optional[float] = None) -> GridFunction:
    n = group_dim(f.grid)
    total = np.zeros_like(f.values)
    for j in range(1, n + 1):
        total = total + vector_field_apply(f"X{j}", vector_field_apply(f"X{j}", f, margin_tol), margin_tol).values
        total = total + vector_field_apply(f"Y{j}", vector_field_apply(f"Y{j}", f, margin_tol), margin_tol).values
    return f.with_values(total)


def gaussian_sample(
    grid: Grid,
    centre: Optional[HPoint] = None,
    width: float = 1.0,
    t_width: float = 1.0,
    amplitude: complex = 1.0,
) -> GridFunction:
    """exp(-(|x|^2 + |y|^2) / 2 width^2 - t^2 / 2 t_width^2) left-translated to ``centre``."""
    n = group_dim(grid)
    coords = mesh(grid)
    if centre is not None:
        coords = group_mul_arrays(-centre.as_array(), coords)
    plane = np.sum(coords[..., : 2 * n] ** 2, axis=-1) / (2 * width**2)
    return GridFunction(grid=grid, values=amplitude * np.exp(-plane - coords[..., -1] ** 2 / (2 * t_width**2)) + 0j)


def random_gaussians(grid: Grid, count: int, seed: int = 0) -> list[GridFunction]:
    """Seeded Gaussians with centres in the unit box and widths in [0.8, 1.25]."""
    n = group_dim(grid)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        centre = HPoint.from_array(rng.uniform(-1.0, 1.0, 2 * n + 1))
        width, t_width = rng.uniform(0.8, 1.25, 2)
        out.append(gaussian_sample(grid, centre, float(width), float(t_width)))
    return out
