from typing import Any, Optional

from pydantic import BaseModel, validator

from heisenberg_psido import config


# ---------- Grid / discretisation schemas -------------
class GridScheme(BaseModel):
    n: int = config.GROUP_DIM
    half_width: float = config.HALF_WIDTH
    points: int = config.POINTS
    hermite_dim: int = config.HERMITE_DIM
    quant_half_width: float = config.QUANT_HALF_WIDTH

    @validator("n")
    def validate_n(cls, v, values, **kwargs):
        assert 1 <= v <= 3, "Group dimension must be 1, 2 or 3"
        return v

    @validator("points")
    def validate_points(cls, v, values, **kwargs):
        assert v >= 8 and v & (v - 1) == 0, "Points per axis must be a power of two"
        return v

    @validator("hermite_dim")
    def validate_hermite_dim(cls, v, values, **kwargs):
        points = values.get("points")
        assert v >= 2, "Keep at least two Hermite functions"
        assert points is None or v <= points // 2, "Hermite truncation must not exceed points / 2"
        return v


class LambdaScheme(BaseModel):
    lam_min: float = config.LAMBDA_MIN
    lam_max: float = config.LAMBDA_MAX
    nodes: int = config.LAMBDA_NODES

    @validator("lam_max")
    def validate_band(cls, v, values, **kwargs):
        assert 0 < values.get("lam_min", 0) < v, "Need 0 < lam_min < lam_max"
        return v

    @validator("nodes")
    def validate_nodes(cls, v, values, **kwargs):
        assert v >= 2, "Need at least two nodes per sign"
        return v


class QuantizeScheme(BaseModel):
    group_half_width: float = config.GROUP_HALF_WIDTH
    group_points: int = config.GROUP_POINTS
    centre_half_width: float = config.CENTRE_HALF_WIDTH
    centre_points: int = config.CENTRE_POINTS
    output_half_width: float = config.OUTPUT_HALF_WIDTH
    output_centre_half_width: float = config.OUTPUT_CENTRE_HALF_WIDTH
    output_points: int = config.OUTPUT_POINTS
    frequency_half_width: float = config.FREQUENCY_HALF_WIDTH
    frequency_points: int = config.FREQUENCY_POINTS

    @validator("centre_half_width")
    def validate_centre(cls, v, values, **kwargs):
        assert v > 0, "Half widths must be positive"
        return v

    @validator("output_centre_half_width")
    def validate_output_box(cls, v, values, **kwargs):
        assert values.get("output_half_width", 0) < values.get("group_half_width", 0), "Output box must sit inside the group box"
        assert v < values.get("centre_half_width", 0), "Output box must sit inside the group box"
        return v


# ---------- Symbol / experiment schemas -------------
class SymbolScheme(BaseModel):
    name: str = "I-L"
    params: dict[str, Any] = {}
    path: Optional[str] = None

    @validator("name")
    def validate_name(cls, v, values, **kwargs):
        assert v, "A symbol name is required"
        return v


class ExperimentScheme(BaseModel):
    name: str = "run"
    out_dir: str = config.OUTPUT_DIR
    seed: int = 0
    samples: int = 3
    R: float = 4.0
    s: float = 0.0
    m0: float = 2.0
    orders: tuple[int, int, int] = (2, 0, 1)

    @validator("samples")
    def validate_samples(cls, v, values, **kwargs):
        assert v >= 1, "At least one sample is required"
        return v

    @validator("R")
    def validate_R(cls, v, values, **kwargs):
        assert v > 0, "R must be positive"
        return v


class CalibrationScheme(BaseModel):
    c_n: Optional[float] = None
    c_n_prime: Optional[float] = None

    @validator("c_n", "c_n_prime")
    def validate_positive(cls, v, values, **kwargs):
        assert v is None or v > 0, "Calibrated constants must be positive"
        return v


class RunConfig(BaseModel):
    grid: GridScheme = GridScheme()
    lam: LambdaScheme = LambdaScheme()
    quantize: QuantizeScheme = QuantizeScheme()
    symbol: SymbolScheme = SymbolScheme()
    experiment: ExperimentScheme = ExperimentScheme()
    tolerances: dict[str, float] = {}
    calibration: CalibrationScheme = CalibrationScheme()

    @validator("tolerances")
    def validate_tolerances(cls, v, values, **kwargs):
        unknown = set(v) - set(config.TOLERANCES)
        assert not unknown, f"Unknown tolerances: {sorted(unknown)}"
        assert all(t > 0 for t in v.values()), "Tolerances must be positive"
        return v

    def resolved_tolerances(self) -> dict[str, float]:
        return {**config.TOLERANCES, **self.tolerances}
