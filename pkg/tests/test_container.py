import numpy as np
import pytest

from heisenberg_psido.container import (
    MAGIC,
    encode,
    read_grid_function,
    read_weyl_symbol,
    write_grid_function,
    write_weyl_symbol,
)
from heisenberg_psido.exceptions import ConfigurationException
from heisenberg_psido.phase_space import WeylSymbol, make_grid


def test_grid_function_round_trip(tmp_path, gaussian):
    path = tmp_path / "phi.hgf"
    write_grid_function(path, gaussian)
    restored = read_grid_function(path)
    assert restored.grid == gaussian.grid
    assert np.array_equal(restored.values, gaussian.values)
    assert path.read_bytes()[:4] == MAGIC


def test_weyl_symbol_round_trip(tmp_path):
    grid = make_grid(1, 6.0, 32)
    symbol = WeylSymbol(u_grid=grid, func=lambda xi, u: (xi[..., 0] + 1j * u[..., 0]) ** 2)
    path = tmp_path / "sigma.hgf"
    write_weyl_symbol(path, symbol)
    restored = read_weyl_symbol(path)
    assert restored.u_grid == grid
    assert np.array_equal(restored.sampled(), symbol.sampled())


def test_bad_magic(tmp_path, gaussian):
    path = tmp_path / "bad.hgf"
    path.write_bytes(b"XXXX" + encode(gaussian.grid, gaussian.values)[4:])
    with pytest.raises(ConfigurationException):
        read_grid_function(path)


def test_truncated_payload(tmp_path, gaussian):
    path = tmp_path / "short.hgf"
    path.write_bytes(encode(gaussian.grid, gaussian.values)[:-16])
    with pytest.raises(ConfigurationException):
        read_grid_function(path)


def test_shape_mismatch_is_refused():
    with pytest.raises(ConfigurationException):
        encode(make_grid(2, 1.0, 8), np.zeros((8, 16)))


def test_weyl_symbol_needs_dual_axes(tmp_path):
    path = tmp_path / "odd.hgf"
    path.write_bytes(encode(make_grid(1, 3.0, 16) + make_grid(1, 5.0, 16), np.ones((16, 16))))
    with pytest.raises(ConfigurationException):
        read_weyl_symbol(path)


def test_weyl_symbol_needs_even_axis_count(tmp_path):
    path = tmp_path / "three.hgf"
    path.write_bytes(encode(make_grid(3, 1.0, 8), np.ones((8, 8, 8))))
    with pytest.raises(ConfigurationException):
        read_weyl_symbol(path)
