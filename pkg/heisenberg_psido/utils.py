import configparser
from pathlib import Path
from typing import Any, Optional, Union

from heisenberg_psido.container import read_grid_function, read_weyl_symbol
from heisenberg_psido.difference_ops import SymbolFamily
from heisenberg_psido.exceptions import ConfigurationException
from heisenberg_psido.heisenberg import group_grid, random_gaussians
from heisenberg_psido.phase_space import Grid, GridFunction, make_grid
from heisenberg_psido.quantize import QuantConfig, default_config
from heisenberg_psido.representations import LambdaGrid, lambda_grid
from heisenberg_psido.schemas import RunConfig
from heisenberg_psido.symbol_calculus import LambdaSymbol, SymbolTerm, builtin_symbols

_SECTIONS = {"grid": "grid", "lambda": "lam", "quantize": "quantize", "experiment": "experiment", "calibration": "calibration"}


def parse_value(raw: str) -> Any:
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_symbol(spec: str) -> tuple[str, dict[str, Any]]:
    """'XY-T:m=2,m0=2' -> ('XY-T', {'m': 2, 'm0': 2})."""
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationException(f"Symbol parameter '{item}' is not of the form key=value")
        params[key.strip()] = parse_value(value.strip())
    return name.strip(), params


def parse_tolerance(spec: str) -> tuple[str, float]:
    key, sep, value = spec.partition("=")
    if not sep:
        raise ConfigurationException(f"Tolerance '{spec}' is not of the form NAME=VAL")
    return key.strip(), float(value)


def load_run_config(path: Optional[Union[str, Path]] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Read the sectioned ini file; values absent from it keep their defaults."""
    data: dict[str, Any] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(path):
            raise ConfigurationException(f"Cannot read config file {path}")
        for section, field in _SECTIONS.items():
            if parser.has_section(section):
                data[field] = {k: parse_value(v) for k, v in parser.items(section)}
        if "orders" in data.get("experiment", {}):
            data["experiment"]["orders"] = tuple(int(k) for k in str(data["experiment"]["orders"]).split(","))
        if parser.has_section("tolerances"):
            data["tolerances"] = {k: float(v) for k, v in parser.items("tolerances")}
        if parser.has_section("symbol"):
            items = dict(parser.items("symbol"))
            name = items.pop("name", "I-L")
            path_ = items.pop("path", None)
            data["symbol"] = {"name": name, "path": path_, "params": {k: parse_value(v) for k, v in items.items()}}
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return RunConfig(**data)


def save_calibration(path: Union[str, Path], c_n: float, c_n_prime: Optional[float]):
    """Write or update the [calibration] section of an ini file."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read(path)
    if not parser.has_section("calibration"):
        parser.add_section("calibration")
    parser.set("calibration", "c_n", repr(float(c_n)))
    if c_n_prime is not None:
        parser.set("calibration", "c_n_prime", repr(float(c_n_prime)))
    with open(path, "w") as handle:
        parser.write(handle)


# ---------- objects built from a resolved config ----------
def group_box(cfg: RunConfig) -> Grid:
    q = cfg.quantize
    return group_grid(cfg.grid.n, q.group_half_width, q.group_points, q.centre_half_width, q.centre_points)


def build_lambda_grid(cfg: RunConfig) -> LambdaGrid:
    return lambda_grid(cfg.grid.n, cfg.lam.lam_min, cfg.lam.lam_max, cfg.lam.nodes, cfg.calibration.c_n)


def build_quant_config(cfg: RunConfig) -> QuantConfig:
    n, q = cfg.grid.n, cfg.quantize
    plane = make_grid(2 * n, q.output_half_width, q.output_points)
    centre = make_grid(1, q.output_centre_half_width, q.output_points)
    return default_config(
        n=n,
        lgrid=build_lambda_grid(cfg),
        dim=cfg.grid.hermite_dim,
        u_grid=make_grid(n, cfg.grid.quant_half_width, cfg.grid.points),
        output_grid=plane + centre,
        frequency_grid=make_grid(2 * n, q.frequency_half_width, q.frequency_points),
        plancherel_constant=cfg.calibration.c_n,
        inversion_constant=cfg.calibration.c_n_prime,
        tolerances=cfg.tolerances,
    )


def build_symbol(cfg: RunConfig) -> LambdaSymbol:
    """Built-in symbol, or a renormalised symbol read from a phase-space container."""
    if cfg.symbol.path is None:
        return builtin_symbols(cfg.symbol.name, cfg.symbol.params, n=cfg.grid.n)
    family = SymbolFamily.from_renormalized(read_weyl_symbol(cfg.symbol.path))
    if family.n != cfg.grid.n:
        raise ConfigurationException("Symbol file and group dimensions differ", data={"file": family.n, "n": cfg.grid.n})
    return LambdaSymbol(
        n=family.n,
        order=float(cfg.symbol.params.get("m_class", 0.0)),
        name=cfg.symbol.name,
        params={**cfg.symbol.params, "path": cfg.symbol.path},
        terms=[SymbolTerm(family=family)],
    )


def build_samples(cfg: RunConfig, path: Optional[Union[str, Path]] = None) -> list[GridFunction]:
    if path is not None:
        return [read_grid_function(path)]
    return random_gaussians(group_box(cfg), cfg.experiment.samples, cfg.experiment.seed)
