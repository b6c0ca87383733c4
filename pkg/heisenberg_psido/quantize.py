"""Quantization of lambda-symbols on H_n.

    A phi(g) = c_n int Tr(pi_lambda(g) sigma(g, lambda) pi_lambda(phi)) |lambda|^n d lambda

is evaluated on a coarse output grid. The Weyl-side route pairs the symbol
with the Euclidean Fourier transform of the left translate phi(g .) instead.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, validator
from scipy.interpolate import make_interp_spline

from heisenberg_psido import config
from heisenberg_psido.difference_ops import SymbolFamily, renormalize
from heisenberg_psido.exceptions import (
    CalibrationException,
    ConfigurationException,
    GridMismatchException,
    NonInjectiveSampleException,
    TailDominanceException,
)
from heisenberg_psido.heisenberg import group_dim
from heisenberg_psido.phase_space import (
    Grid,
    Grid1D,
    GridFunction,
    RepOperator,
    cell_volume,
    grid_shape,
    make_grid,
    mesh,
    opw_matrix,
    sandwich_power,
)
from heisenberg_psido.representations import (
    LambdaGrid,
    check_band,
    displacement_matrices,
    euclidean_transform,
    group_fourier_matrix,
    lambda_grid,
    reference_inversion_constant,
    signed_sqrt,
)
from heisenberg_psido.symbol_calculus import (
    LambdaSymbol,
    SampleBox,
    SymbolTerm,
    builtin_symbols,
    cutoff_symbol,
    parametrix_leading,
)

logger = logging.getLogger(__name__)

# complex entries held at once by the vectorised kernels
_CHUNK_ELEMENTS = 1 << 20


class QuantConfig(BaseModel):
    lgrid: LambdaGrid
    dim: int
    u_grid: Grid
    output_grid: Grid
    frequency_grid: Grid
    plancherel_constant: float
    inversion_constant: float
    tolerances: dict[str, float] = {}

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("output_grid")
    def validate_output_grid(cls, v, values, **kwargs):
        lgrid = values.get("lgrid")
        assert lgrid is None or len(v) == 2 * lgrid.n + 1, "Output grid must have 2n+1 axes"
        return v

    @validator("frequency_grid")
    def validate_frequency_grid(cls, v, values, **kwargs):
        lgrid = values.get("lgrid")
        assert lgrid is None or len(v) == 2 * lgrid.n, "Frequency grid must have 2n axes"
        return v

    @validator("plancherel_constant", "inversion_constant")
    def validate_constants(cls, v, values, **kwargs):
        assert v > 0 and math.isfinite(v), "Constants must be positive"
        return v

    @property
    def n(self) -> int:
        return self.lgrid.n

    def tol(self, name: str) -> float:
        return {**config.TOLERANCES, **self.tolerances}[name]


def default_config(
    n: int = config.GROUP_DIM,
    lgrid: Optional[LambdaGrid] = None,
    dim: int = config.HERMITE_DIM,
    u_grid: Optional[Grid] = None,
    output_grid: Optional[Grid] = None,
    frequency_grid: Optional[Grid] = None,
    plancherel_constant: Optional[float] = None,
    inversion_constant: Optional[float] = None,
    tolerances: Optional[dict] = None,
) -> QuantConfig:
    """Desk-scale configuration; constants default to their reference values."""
    lgrid = lgrid or lambda_grid(n)
    if output_grid is None:
        plane = Grid1D(half_width=config.OUTPUT_HALF_WIDTH, points=config.OUTPUT_POINTS)
        centre = Grid1D(half_width=config.OUTPUT_CENTRE_HALF_WIDTH, points=config.OUTPUT_POINTS)
        output_grid = (plane,) * (2 * n) + (centre,)
    return QuantConfig(
        lgrid=lgrid,
        dim=dim,
        u_grid=u_grid or make_grid(n, config.QUANT_HALF_WIDTH, config.POINTS),
        output_grid=output_grid,
        frequency_grid=frequency_grid or make_grid(2 * n, config.FREQUENCY_HALF_WIDTH, config.FREQUENCY_POINTS),
        plancherel_constant=plancherel_constant or lgrid.plancherel_constant,
        inversion_constant=inversion_constant or reference_inversion_constant(n),
        tolerances=tolerances or {},
    )


class Quantized(BaseModel):
    function: GridFunction
    tail_fraction: float


# ---------------------------------------------------------------- helpers


def restrict(f: GridFunction, grid: Grid) -> GridFunction:
    """Tensor cubic interpolation of ``f`` onto the nodes of ``grid``."""
    if len(f.grid) != len(grid):
        raise GridMismatchException(data={"source_axes": len(f.grid), "target_axes": len(grid)})
    values = f.values
    for axis, (source, target) in enumerate(zip(f.grid, grid)):
        if np.max(np.abs(target.nodes)) > source.nodes[-1]:
            raise GridMismatchException("Target grid reaches outside the sampled box", data={"axis": axis})
        values = make_interp_spline(source.nodes, values, k=3, axis=axis)(target.nodes)
    return GridFunction(grid=grid, values=values)


def relative_error(approx: GridFunction, exact: GridFunction) -> float:
    return (approx.with_values(approx.values - exact.values)).l2_norm() / exact.l2_norm()


def _check_symbol(sym: LambdaSymbol, cfg: QuantConfig):
    if sym.n != cfg.n:
        raise ConfigurationException("Symbol and configuration dimensions differ", data={"symbol": sym.n, "config": cfg.n})


def _require_separated(sym: LambdaSymbol, what: str):
    if sym.joint is not None:
        raise ConfigurationException(f"{what} needs a symbol given by separate terms", data={"symbol": sym.name})


def _require_g_independent(sym: LambdaSymbol, what: str):
    if not sym.g_independent:
        raise ConfigurationException(f"{what} is implemented for g-independent symbols", data={"symbol": sym.name})


def fourier_slices(phi: GridFunction, cfg: QuantConfig) -> list[RepOperator]:
    """pi_lambda(phi) at every node of the lambda grid."""
    if group_dim(phi.grid) != cfg.n:
        raise ConfigurationException("Function and configuration dimensions differ")
    slices = []
    for lam in cfg.lgrid.nodes:
        slices.append(group_fourier_matrix(phi, float(lam), cfg.dim, cfg.u_grid))
        logger.debug("fourier_slices: lambda=%.4g done", lam)
    return slices


def symbol_matrices(family: SymbolFamily, cfg: QuantConfig) -> list[np.ndarray]:
    return [opw_matrix(family.weyl_symbol(float(lam), cfg.u_grid), cfg.dim, lam=float(lam)).matrix for lam in cfg.lgrid.nodes]


def _coefficient_values(term: SymbolTerm, cfg: QuantConfig) -> Optional[np.ndarray]:
    if term.coefficient is None:
        return None
    values = np.asarray(term.coefficient(mesh(cfg.output_grid)), dtype=complex)
    return np.broadcast_to(values, grid_shape(cfg.output_grid))


def _multiply(left: Optional[np.ndarray], right: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if left is None:
        return right
    if right is None:
        return left
    return left * right


def _plane_and_centre(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    n = group_dim(grid)
    return mesh(grid[: 2 * n]).reshape(-1, 2 * n), grid[-1].nodes


def _plane_traces(lam: float, plane: np.ndarray, matrix: np.ndarray, dim: int) -> np.ndarray:
    """Tr(pi_lambda(x, y, 0) M) for every plane point."""
    n = plane.shape[1] // 2
    block = max(1, _CHUNK_ELEMENTS // (dim * dim))
    out = np.empty(len(plane), dtype=complex)
    for start in range(0, len(plane), block):
        points = plane[start : start + block]
        disp = displacement_matrices(lam, points[:, :n], points[:, n:], dim)
        out[start : start + block] = np.einsum("qij,ji->q", disp, matrix)
    return out


def _finish(total: np.ndarray, profile: np.ndarray, constant: float, cfg: QuantConfig, what: str) -> Quantized:
    tail = cfg.lgrid.tail_fraction(profile)
    if tail > cfg.tol("tail"):
        raise TailDominanceException(data={"tail_fraction": tail, "tol": cfg.tol("tail"), "lam_max": cfg.lgrid.lam_max})
    logger.debug("%s: tail fraction %.3e", what, tail)
    return Quantized(function=GridFunction(grid=cfg.output_grid, values=constant * total), tail_fraction=tail)


# Part: coefficient over the output grid (None for 1) and one matrix per lambda node
Part = tuple[Optional[np.ndarray], list[np.ndarray]]


def _trace_integral(parts: list[Part], cfg: QuantConfig, what: str) -> Quantized:
    shape = grid_shape(cfg.output_grid)
    plane, centre = _plane_and_centre(cfg.output_grid)
    total = np.zeros(shape, dtype=complex)
    profile = np.zeros(cfg.lgrid.size)
    for i, lam in enumerate(cfg.lgrid.nodes):
        lam = float(lam)
        integrand = np.zeros(shape, dtype=complex)
        for coefficient, matrices in parts:
            traces = _plane_traces(lam, plane, matrices[i], cfg.dim)
            values = (traces[:, None] * np.exp(1j * lam * centre)[None, :]).reshape(shape)
            integrand += values if coefficient is None else coefficient * values
        total += cfg.lgrid.weights[i] * integrand
        profile[i] = math.sqrt(float(np.sum(np.abs(integrand) ** 2)))
    return _finish(total, profile, cfg.plancherel_constant, cfg, what)


# ---------------------------------------------------------------- trace route


def apply_report(
    sym: LambdaSymbol, phi: GridFunction, cfg: QuantConfig, slices: Optional[list[RepOperator]] = None
) -> Quantized:
    _check_symbol(sym, cfg)
    if sym.joint is not None:
        logger.info("apply: %s does not separate in g, using the Weyl-side route", sym.name)
        return apply_weyl_form_report(sym, phi, cfg)
    slices = slices if slices is not None else fourier_slices(phi, cfg)
    parts = []
    for term in sym.terms:
        matrices = symbol_matrices(term.family, cfg)
        parts.append((_coefficient_values(term, cfg), [s @ f.matrix for s, f in zip(matrices, slices)]))
    return _trace_integral(parts, cfg, f"apply({sym.name})")


def apply(sym: LambdaSymbol, phi: GridFunction, cfg: QuantConfig, slices: Optional[list[RepOperator]] = None) -> GridFunction:
    return apply_report(sym, phi, cfg, slices).function


def apply_composed(
    factors: Sequence[LambdaSymbol], phi: GridFunction, cfg: QuantConfig, slices: Optional[list[RepOperator]] = None
) -> GridFunction:
    """Op(factors[0]) ... Op(factors[-1]) phi through products of the Hermite matrices.

    Exact when every factor but the leftmost is independent of g.
    """
    if not factors:
        raise ConfigurationException("Nothing to compose")
    for sym in factors:
        _check_symbol(sym, cfg)
        _require_separated(sym, "apply_composed")
    if any(not sym.g_independent for sym in factors[1:]):
        logger.warning("apply_composed: g-dependent inner factor, the result is a leading-order composition")
    slices = slices if slices is not None else fourier_slices(phi, cfg)
    parts: list[Part] = [(None, [f.matrix for f in slices])]
    for sym in reversed(factors):
        composed = []
        for term in sym.terms:
            matrices = symbol_matrices(term.family, cfg)
            coefficient = _coefficient_values(term, cfg)
            for inner, products in parts:
                composed.append((_multiply(coefficient, inner), [s @ p for s, p in zip(matrices, products)]))
        parts = composed
    name = " o ".join(sym.name for sym in factors)
    return _trace_integral(parts, cfg, f"apply_composed({name})").function


def apply_adjoint(
    sym: LambdaSymbol, phi: GridFunction, cfg: QuantConfig, slices: Optional[list[RepOperator]] = None
) -> GridFunction:
    """Op(sigma)^* phi, with every sigma(lambda) replaced by its conjugate transpose."""
    _check_symbol(sym, cfg)
    _require_g_independent(sym, "apply_adjoint")
    slices = slices if slices is not None else fourier_slices(phi, cfg)
    matrices = symbol_matrices(sym.family(), cfg)
    parts = [(None, [s.conj().T @ f.matrix for s, f in zip(matrices, slices)])]
    return _trace_integral(parts, cfg, f"apply_adjoint({sym.name})").function


def adjoint_probe(sym: LambdaSymbol, phi: GridFunction, psi: GridFunction, cfg: QuantConfig) -> float:
    """|<Op(sigma) phi, psi> - <phi, Op(sigma)^* psi>| / (||Op(sigma) phi|| ||psi||) on the output grid."""
    image = apply(sym, phi, cfg)
    adjoint_image = apply_adjoint(sym, psi, cfg)
    phi_out, psi_out = restrict(phi, cfg.output_grid), restrict(psi, cfg.output_grid)
    lhs = image.inner(psi_out)
    rhs = phi_out.inner(adjoint_image)
    scale = image.l2_norm() * psi_out.l2_norm()
    gap = abs(lhs - rhs) / scale if scale else 0.0
    logger.info("adjoint_probe: %s gap=%.3e", sym.name, gap)
    return float(gap)


# ---------------------------------------------------------------- Weyl-side route


def _weyl_integrand(
    sym: LambdaSymbol,
    lam: float,
    transform: np.ndarray,
    freq: np.ndarray,
    plane: np.ndarray,
    centre: np.ndarray,
    coefficients: list[Optional[np.ndarray]],
) -> np.ndarray:
    """int a~(eta - lambda y/2, zeta + lambda x/2) e^{i(x.eta + y.zeta)} F(eta, zeta) at each (x, y), times e^{i lambda t}.

    F is the normalised Fourier transform of phi at t-frequency lambda and a~ the renormalised symbol.
    """
    n = plane.shape[1] // 2
    phase_t = np.exp(1j * lam * centre)
    out = np.zeros((len(plane), len(centre)), dtype=complex)
    renormalized = [renormalize(term.family) for term in sym.terms] if sym.joint is None else []
    block = max(1, _CHUNK_ELEMENTS // len(freq))
    for start in range(0, len(plane), block):
        rows = slice(start, start + block)
        points = plane[rows]
        wave = np.exp(1j * points @ freq.T) * transform[None, :]
        shift = np.concatenate([-0.5 * lam * points[:, n:], 0.5 * lam * points[:, :n]], axis=-1)
        args = freq[None, :, :] + shift[:, None, :]
        eta, zeta = args[..., :n], args[..., n:]
        if sym.joint is None:
            for family, coefficient in zip(renormalized, coefficients):
                values = np.sum(family(lam, eta, zeta) * wave, axis=-1)[:, None] * phase_t[None, :]
                if coefficient is not None:
                    values = coefficient[rows] * values
                out[rows] += values
            continue
        xi, u = eta / math.sqrt(abs(lam)), zeta / signed_sqrt(lam)
        for j, t in enumerate(centre):
            g = np.concatenate([points, np.full((len(points), 1), t)], axis=-1)[:, None, :]
            out[rows, j] = np.sum(sym.joint(g, lam, xi, u) * wave, axis=-1) * phase_t[j]
    return out


def apply_weyl_form_report(sym: LambdaSymbol, phi: GridFunction, cfg: QuantConfig) -> Quantized:
    """Op(sigma) phi by the Weyl-side formula, with the inversion constant c'_n.

    Each lambda takes the Euclidean transform of phi at t-frequency lambda on
    ``cfg.frequency_grid`` (euclidean_transform) and integrates the renormalised
    symbol against it; no Hermite matrices are formed.
    """
    _check_symbol(sym, cfg)
    n = cfg.n
    shape = grid_shape(cfg.output_grid)
    plane, centre = _plane_and_centre(cfg.output_grid)
    freq = mesh(cfg.frequency_grid).reshape(-1, 2 * n)
    volume = cell_volume(cfg.frequency_grid)
    normalisation = (2 * math.pi) ** (-(2 * n + 1) / 2)
    coefficients = []
    if sym.joint is None:
        for term in sym.terms:
            values = _coefficient_values(term, cfg)
            coefficients.append(None if values is None else values.reshape(len(plane), len(centre)))

    total = np.zeros(shape, dtype=complex)
    profile = np.zeros(cfg.lgrid.size)
    for i, lam in enumerate(cfg.lgrid.nodes):
        lam = float(lam)
        check_band(phi, lam)
        frequencies = [g.nodes for g in cfg.frequency_grid] + [np.array([lam])]
        transform = euclidean_transform(phi, frequencies)[..., 0].ravel() * normalisation
        integrand = _weyl_integrand(sym, lam, transform, freq, plane, centre, coefficients)
        integrand = integrand.reshape(shape) * volume * (2 * math.pi) ** (-n) / abs(lam) ** n
        total += cfg.lgrid.weights[i] * integrand
        profile[i] = math.sqrt(float(np.sum(np.abs(integrand) ** 2)))
        logger.debug("apply_weyl_form: lambda=%.4g done", lam)
    return _finish(total, profile, cfg.inversion_constant, cfg, f"apply_weyl_form({sym.name})")


def apply_weyl_form(sym: LambdaSymbol, phi: GridFunction, cfg: QuantConfig) -> GridFunction:
    return apply_weyl_form_report(sym, phi, cfg).function


# ---------------------------------------------------------------- calibration


class InversionCalibration(BaseModel):
    constant: float
    reference: float
    spread: float
    per_function: list[float]
    ratio_to_plancherel: float
    tail_fraction: float


def calibrate_inversion(
    test_functions: list[GridFunction], cfg: QuantConfig, tolerances: Optional[dict] = None
) -> InversionCalibration:
    """c'_n fitted by least squares so that the Weyl-side Op(1) reproduces each test function."""
    tol = {**config.TOLERANCES, **cfg.tolerances, **(tolerances or {})}
    if not test_functions:
        raise ConfigurationException("At least one test function is required")
    unit = cfg.copy(update={"inversion_constant": 1.0})
    one = builtin_symbols("one", n=cfg.n)
    constants, tails = [], []
    for phi in test_functions:
        report = apply_weyl_form_report(one, phi, unit)
        target = restrict(phi, cfg.output_grid)
        image = report.function
        constants.append(float(np.real(image.inner(target)) / image.l2_norm() ** 2))
        tails.append(report.tail_fraction)
    constant = float(np.mean(constants))
    spread = float((max(constants) - min(constants)) / constant)
    logger.info("calibrate_inversion: c'_n=%.6g spread=%.3e", constant, spread)
    if spread > tol["plancherel_spread"]:
        raise CalibrationException(data={"constants": constants, "spread": spread})
    return InversionCalibration(
        constant=constant,
        reference=reference_inversion_constant(cfg.n),
        spread=spread,
        per_function=constants,
        ratio_to_plancherel=constant / cfg.plancherel_constant,
        tail_fraction=max(tails),
    )


# ---------------------------------------------------------------- Sobolev norms


def _sobolev_from_matrices(
    matrices: Sequence[np.ndarray], s: float, cfg: QuantConfig, dim: Optional[int] = None, check_tail: bool = True
) -> tuple[float, float]:
    """(c_n int ||pi(I-L)^{s/2} M_lambda||_HS^2 |lambda|^n d lambda)^{1/2} and the tail fraction."""
    dim = dim or cfg.dim
    profile = np.array(
        [
            np.sum(np.abs(sandwich_power(RepOperator(lam=float(lam), dim=dim, matrix=m[:dim, :dim]), s / 2, 0, n=cfg.n).matrix) ** 2)
            for lam, m in zip(cfg.lgrid.nodes, matrices)
        ]
    )
    tail = cfg.lgrid.check_tail(profile, cfg.tol("tail")) if check_tail else cfg.lgrid.tail_fraction(profile)
    return math.sqrt(cfg.plancherel_constant * float(np.real(cfg.lgrid.integrate(profile)))), tail


def sobolev_norm(phi: GridFunction, s: float, cfg: QuantConfig, slices: Optional[list[RepOperator]] = None) -> float:
    slices = slices if slices is not None else fourier_slices(phi, cfg)
    return _sobolev_from_matrices([f.matrix for f in slices], s, cfg)[0]


class ProbeRecord(BaseModel):
    sample: int
    s: float
    m: float
    ratio: float
    tail_fraction: float
    truncation_delta: float


class ProbeReport(BaseModel):
    mode: str
    symbol: str
    records: list[ProbeRecord]

    @property
    def ratio(self) -> float:
        return max(r.ratio for r in self.records)


def _probe(
    sym: LambdaSymbol,
    samples: list[GridFunction],
    cfg: QuantConfig,
    mode: str,
    s_numerator: float,
    s_denominator: float,
    image_on_top: bool,
    m: float,
    s: float,
) -> ProbeReport:
    _check_symbol(sym, cfg)
    _require_g_independent(sym, f"{mode} probe")
    if not samples:
        raise ConfigurationException("Probes need at least one sample")
    symbol = symbol_matrices(sym.family(), cfg)
    half = cfg.dim // 2
    records = []
    for index, phi in enumerate(samples):
        slices = [f.matrix for f in fourier_slices(phi, cfg)]
        ratios, tails = [], []
        for dim in (cfg.dim, half):
            images = [a[:dim, :dim] @ f[:dim, :dim] for a, f in zip(symbol, slices)]
            top, bottom = (images, slices) if image_on_top else (slices, images)
            numerator, tail_top = _sobolev_from_matrices(top, s_numerator, cfg, dim)
            denominator, tail_bottom = _sobolev_from_matrices(bottom, s_denominator, cfg, dim)
            if denominator <= cfg.tol("injectivity") * numerator:
                raise NonInjectiveSampleException(data={"sample": index, "numerator": numerator, "denominator": denominator})
            ratios.append(numerator / denominator)
            tails.append(max(tail_top, tail_bottom))
        delta = abs(ratios[0] - ratios[1]) / ratios[0]
        records.append(ProbeRecord(sample=index, s=s, m=m, ratio=ratios[0], tail_fraction=tails[0], truncation_delta=delta))
        logger.info("%s probe: %s sample %d ratio=%.6g", mode, sym.name, index, ratios[0])
    return ProbeReport(mode=mode, symbol=sym.name, records=records)


def boundedness_probe(
    sym: LambdaSymbol, s: float, samples: list[GridFunction], cfg: QuantConfig, m: Optional[float] = None
) -> ProbeReport:
    """max over samples of ||Op(sigma) phi||_{L^2_{s-m}} / ||phi||_{L^2_s}."""
    m = sym.order if m is None else m
    return _probe(sym, samples, cfg, "bounded", s - m, s, True, m, s)


def subelliptic_probe(sym: LambdaSymbol, m0: float, s: float, samples: list[GridFunction], cfg: QuantConfig) -> ProbeReport:
    """max over samples of ||phi||_{L^2_{s+m0}} / ||Op(sigma) phi||_{L^2_s}."""
    return _probe(sym, samples, cfg, "subelliptic", s + m0, s, False, m0, s)


# ---------------------------------------------------------------- parametrix


class ParametrixResidual(BaseModel):
    R: float
    defect: float
    cutoff_defect: float
    tail_fraction: float


def parametrix_residual(
    sym: LambdaSymbol, R: float, phi: GridFunction, cfg: QuantConfig, box: Optional[SampleBox] = None,
    slices: Optional[list[RepOperator]] = None,
) -> ParametrixResidual:
    """||Op(b)Op(a)phi - Op(chi_R)phi|| and ||Op(chi_R)phi - phi||, relative to ||phi||, in the Plancherel norm."""
    _check_symbol(sym, cfg)
    _require_g_independent(sym, "parametrix_residual")
    inverse = parametrix_leading(sym, R, box)
    chi = cutoff_symbol(sym.n, R)
    slices = [f.matrix for f in (slices if slices is not None else fourier_slices(phi, cfg))]
    a = symbol_matrices(sym.family(), cfg)
    b = symbol_matrices(inverse.family(), cfg)
    x = symbol_matrices(chi.family(), cfg)
    base, tail = _sobolev_from_matrices(slices, 0.0, cfg)
    defect, _ = _sobolev_from_matrices([(bb @ aa - xx) @ f for aa, bb, xx, f in zip(a, b, x, slices)], 0.0, cfg, check_tail=False)
    cut, _ = _sobolev_from_matrices([xx @ f - f for xx, f in zip(x, slices)], 0.0, cfg, check_tail=False)
    result = ParametrixResidual(R=R, defect=defect / base, cutoff_defect=cut / base, tail_fraction=tail)
    logger.info("parametrix_residual: %s R=%s defect=%.4g cutoff=%.4g", sym.name, R, result.defect, result.cutoff_defect)
    return result
