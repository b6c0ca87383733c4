"""Binary container for sampled functions and symbols.

Layout (little endian): magic b"HGF1", uint32 axis count, then per axis
float64 half-width and uint64 points, then the row-major complex128 values.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from heisenberg_psido.exceptions import ConfigurationException
from heisenberg_psido.phase_space import Grid1D, GridFunction, WeylSymbol, grid_shape

logger = logging.getLogger(__name__)

MAGIC = b"HGF1"
_AXIS = np.dtype([("half_width", "<f8"), ("points", "<u8")])


def encode(grid: tuple[Grid1D, ...], values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype="<c16")
    if values.shape != grid_shape(grid):
        raise ConfigurationException("Values do not match the grid", data={"shape": list(values.shape)})
    axes = np.array([(g.half_width, g.points) for g in grid], dtype=_AXIS)
    return MAGIC + np.array([len(grid)], dtype="<u4").tobytes() + axes.tobytes() + np.ascontiguousarray(values).tobytes()


def decode(payload: bytes) -> tuple[tuple[Grid1D, ...], np.ndarray]:
    if payload[:4] != MAGIC:
        raise ConfigurationException("Not a function container", data={"magic": payload[:4].hex()})
    count = int(np.frombuffer(payload, dtype="<u4", count=1, offset=4)[0])
    axes = np.frombuffer(payload, dtype=_AXIS, count=count, offset=8)
    grid = tuple(Grid1D(half_width=float(a["half_width"]), points=int(a["points"])) for a in axes)
    offset = 8 + count * _AXIS.itemsize
    expected = int(np.prod(grid_shape(grid))) * 16
    if len(payload) - offset != expected:
        raise ConfigurationException("Truncated container", data={"expected": expected, "found": len(payload) - offset})
    values = np.frombuffer(payload, dtype="<c16", offset=offset).reshape(grid_shape(grid)).astype(complex)
    return grid, values


def write_grid_function(path: Union[str, Path], f: GridFunction):
    Path(path).write_bytes(encode(f.grid, f.values))
    logger.debug("write_grid_function: %s axes=%d", path, f.dim)


def read_grid_function(path: Union[str, Path]) -> GridFunction:
    grid, values = decode(Path(path).read_bytes())
    return GridFunction(grid=grid, values=values)


def write_weyl_symbol(path: Union[str, Path], a: WeylSymbol):
    """Stored on xi-grid x u-grid; the xi axes are the duals of the u axes."""
    Path(path).write_bytes(encode(tuple(a.xi_grid) + tuple(a.u_grid), a.sampled()))


def read_weyl_symbol(path: Union[str, Path]) -> WeylSymbol:
    grid, values = decode(Path(path).read_bytes())
    if len(grid) % 2:
        raise ConfigurationException("A phase-space container needs an even number of axes")
    n = len(grid) // 2
    u_grid = grid[n:]
    if any(xi != u.dual() for xi, u in zip(grid[:n], u_grid)):
        raise ConfigurationException("The xi axes must be the duals of the u axes")
    return WeylSymbol(u_grid=u_grid, values=values)
