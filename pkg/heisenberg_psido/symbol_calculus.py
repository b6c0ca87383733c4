"""Symbol classes S^m_{rho,delta} on H_n through their lambda-symbols.

A LambdaSymbol a(g, lambda, xi, u) is stored as a sum of terms
c_k(g) * b_k(lambda, xi, u); a term without coefficient does not depend on g.
Symbols that do not separate (parametrices of g-dependent symbols) carry a
joint evaluator instead.
"""
import itertools
import logging
import math
from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, validator
from scipy.linalg import svdvals

from heisenberg_psido import config
from heisenberg_psido.difference_ops import (
    SymbolFamily,
    delta_power,
    delta_t,
    delta_x,
    delta_y,
    mixed_partial,
    plain_partial,
    renormalize,
    stencil_gain,
    tilde_partial_literal,
)
from heisenberg_psido.exceptions import (
    ConfigurationException,
    EllipticityException,
    EngineException,
    NonSmoothSymbolException,
    TruncationException,
)
from heisenberg_psido.heisenberg import MultiIndex, group_mul_arrays, parse_field
from heisenberg_psido.phase_space import Grid, make_grid, opw_matrix, sandwich_power

logger = logging.getLogger(__name__)

# g with trailing axis 2n+1 -> complex
Coefficient = Callable[[np.ndarray], np.ndarray]
# (g, lambda, xi, u) -> complex
JointFunc = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class SymbolTerm(BaseModel):
    family: SymbolFamily
    coefficient: Optional[Coefficient] = None

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True


class LambdaSymbol(BaseModel):
    n: int
    order: float
    rho: float = 1.0
    delta: float = 0.0
    name: str = "symbol"
    params: dict[str, Any] = {}
    terms: list[SymbolTerm] = []
    joint: Optional[JointFunc] = None

    class Config:
        allow_mutation = False
        arbitrary_types_allowed = True

    @validator("delta")
    def validate_rho_delta(cls, v, values, **kwargs):
        rho = values.get("rho")
        assert rho is not None and 1 >= rho >= v >= 0, "Need 1 >= rho >= delta >= 0"
        assert (rho, v) != (0, 0), "rho and delta cannot both vanish"
        return v

    @validator("joint", always=True)
    def validate_representation(cls, v, values, **kwargs):
        assert (v is None) != (not values.get("terms")), "Give either terms or a joint evaluator"
        return v

    @property
    def g_independent(self) -> bool:
        return self.joint is None and all(t.coefficient is None for t in self.terms)

    def family(self) -> SymbolFamily:
        """The lambda-family of a g-independent symbol."""
        if not self.g_independent:
            raise ConfigurationException(f"{self.name} depends on g")
        return sum_families([t.family for t in self.terms])

    def family_at(self, g: np.ndarray) -> SymbolFamily:
        g = np.asarray(g, dtype=float)
        if self.joint is not None:
            joint = self.joint
            return SymbolFamily(n=self.n, evaluator=lambda lam, xi, u: joint(g, lam, xi, u))
        scaled = []
        for term in self.terms:
            if term.coefficient is None:
                scaled.append(term.family)
            else:
                weight = np.asarray(term.coefficient(g), dtype=complex)
                fam = term.family
                scaled.append(SymbolFamily(n=self.n, evaluator=lambda lam, xi, u, fam=fam, weight=weight: weight * fam(lam, xi, u)))
        return sum_families(scaled)

    def evaluate(self, g, lam, xi, u) -> np.ndarray:
        return self.family_at(g)(lam, xi, u)

    def map_families(self, fn: Callable[[SymbolFamily], SymbolFamily], order: Optional[float] = None) -> "LambdaSymbol":
        if self.joint is not None:
            raise ConfigurationException("Joint symbols have no separate families")
        terms = [SymbolTerm(family=fn(t.family), coefficient=t.coefficient) for t in self.terms]
        return self.copy(update={"terms": terms, "order": self.order if order is None else order})

    def with_order(self, order: float) -> "LambdaSymbol":
        return self.copy(update={"order": order})


def sum_families(families: list[SymbolFamily]) -> SymbolFamily:
    if len(families) == 1:
        return families[0]
    n = families[0].n
    low = max(f.lambda_band[0] for f in families)
    high = min(f.lambda_band[1] for f in families)
    return SymbolFamily(
        n=n,
        evaluator=lambda lam, xi, u: sum(np.asarray(f(lam, xi, u), dtype=complex) for f in families),
        lambda_band=(low, high),
    )


def weight(lam, xi, u) -> np.ndarray:
    """1 + |lambda| (1 + |xi|^2 + |u|^2)."""
    return 1 + np.abs(lam) * (1 + np.sum(np.asarray(xi) ** 2, axis=-1) + np.sum(np.asarray(u) ** 2, axis=-1))


# ---------------------------------------------------------------- g-derivatives


def _flow_points(g: np.ndarray, deltas: list, n: int) -> np.ndarray:
    """g . exp(s.X) . exp(r.Y) . exp(tau T) for deltas = (s_1..s_n, r_1..r_n, tau)."""
    shape = np.broadcast_shapes(g.shape[:-1], *[np.shape(d) for d in deltas])
    zeros = np.zeros(shape)
    s = np.stack([zeros + deltas[j] for j in range(n)], axis=-1)
    r = np.stack([zeros + deltas[n + j] for j in range(n)], axis=-1)
    tau = (zeros + deltas[2 * n])[..., None]
    zn = np.zeros(shape + (n,))
    out = group_mul_arrays(np.broadcast_to(g, shape + g.shape[-1:]), np.concatenate([s, zn, zeros[..., None]], axis=-1))
    out = group_mul_arrays(out, np.concatenate([zn, r, zeros[..., None]], axis=-1))
    return group_mul_arrays(out, np.concatenate([zn, zn, tau], axis=-1))


def left_derivative(
    func: Callable[[np.ndarray], np.ndarray],
    g: np.ndarray,
    word: MultiIndex,
    check: bool = True,
    with_roundoff: bool = False,
):
    """X^{alpha1} Y^{alpha2} T^{alpha3} func at the points ``g`` by differentiating along the flows."""
    g = np.asarray(g, dtype=float)
    n = (g.shape[-1] - 1) // 2
    orders = list(word.alpha1) + list(word.alpha2) + [word.alpha3]
    return mixed_partial(
        lambda deltas: func(_flow_points(g, deltas, n)),
        orders,
        [1.0] * len(orders),
        check=check,
        with_roundoff=with_roundoff,
    )


def g_words(n: int, max_degree: int) -> list[MultiIndex]:
    """All words X^{a1} Y^{a2} T^{a3} of homogeneous degree at most ``max_degree``."""
    out = []
    for entries in itertools.product(range(max_degree + 1), repeat=2 * n + 1):
        word = MultiIndex(alpha1=entries[:n], alpha2=entries[n : 2 * n], alpha3=entries[-1])
        if word.degree <= max_degree:
            out.append(word)
    return sorted(out, key=lambda w: (w.degree, -sum(w.alpha1), -sum(w.alpha2)))


# ---------------------------------------------------------------- samples


class SampleBox(BaseModel):
    """Finite sample of (g, lambda, xi, u) standing in for the unbounded domain."""

    lam_min: float = 1 / 16
    lam_max: float = 16.0
    lam_points: int = 8
    half_width: float = 4.0
    points: int = 17
    g_half_width: float = 2.0
    g_points: int = 5

    class Config:
        allow_mutation = False

    @validator("lam_max")
    def validate_band(cls, v, values, **kwargs):
        assert 0 < values.get("lam_min", 0) < v, "Need 0 < lam_min < lam_max"
        return v

    @validator("points", "g_points")
    def validate_points(cls, v, values, **kwargs):
        assert v >= 3 and v % 2 == 1, "Sample point counts must be odd so that 0 is sampled"
        return v

    def refined(self) -> "SampleBox":
        """Twice the box, twice the lambda band at both ends, half the spacing."""
        return SampleBox(
            lam_min=self.lam_min / 2,
            lam_max=self.lam_max * 2,
            lam_points=2 * self.lam_points,
            half_width=2 * self.half_width,
            points=4 * (self.points - 1) + 1,
            g_half_width=2 * self.g_half_width,
            g_points=2 * (self.g_points - 1) + 1,
        )

    def lambdas(self) -> np.ndarray:
        positive = np.geomspace(self.lam_min, self.lam_max, self.lam_points)
        return np.concatenate([-positive[::-1], positive])

    def phase_points(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        nodes = np.linspace(-self.half_width, self.half_width, self.points)
        grid = np.stack(np.meshgrid(*([nodes] * (2 * n)), indexing="ij"), axis=-1).reshape(-1, 2 * n)
        return grid[:, :n], grid[:, n:]

    def group_points(self, n: int) -> np.ndarray:
        nodes = np.linspace(-self.g_half_width, self.g_half_width, self.g_points)
        return np.stack(np.meshgrid(*([nodes] * (2 * n + 1)), indexing="ij"), axis=-1).reshape(-1, 2 * n + 1)

    def arrays(self, n: int, with_g: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(g, lambda, xi, u) broadcasting over axes (G, L, P)."""
        xi, u = self.phase_points(n)
        g = self.group_points(n) if with_g else np.zeros((1, 2 * n + 1))
        return g[:, None, None, :], self.lambdas()[None, :, None], xi[None, None, :, :], u[None, None, :, :]


# ---------------------------------------------------------------- Shubin estimates


def _with_orders(fam: SymbolFamily, alpha, beta, alpha_t) -> SymbolFamily:
    return fam.copy(
        update={
            "xi_orders": tuple(a + b for a, b in zip(fam.xi_orders, alpha)),
            "u_orders": tuple(a + b for a, b in zip(fam.u_orders, beta)),
            "lam_order": fam.lam_order + alpha_t,
        }
    )


def _renormalized_scale(lam, alpha, beta) -> np.ndarray:
    """|d_xi^alpha d_u^beta| = |lambda|^{(|alpha|+|beta|)/2} times the renormalized partial."""
    return np.abs(lam) ** ((sum(alpha) + sum(beta)) / 2)


def _estimate_rhs(sym: LambdaSymbol, lam, xi, u, alpha, beta, alpha_t, word: MultiIndex) -> np.ndarray:
    k = sum(alpha) + sum(beta)
    exponent = sym.order - 2 * sym.rho * alpha_t + sym.delta * word.degree - sym.rho * k
    return np.abs(lam) ** (sym.rho * k / 2) * weight(lam, xi, u) ** (exponent / 2)


def _seminorm_with_roundoff(
    sym: LambdaSymbol,
    alpha: tuple[int, ...],
    beta: tuple[int, ...],
    alpha_t: int,
    beta_g: MultiIndex,
    box: SampleBox,
) -> tuple[float, float]:
    """The seminorm and the same supremum taken over the roundoff estimate of the derivative."""
    n = sym.n
    if beta_g.degree and sym.g_independent:
        return 0.0, 0.0
    g, lam, xi, u = box.arrays(n, with_g=not sym.g_independent)
    rhs = _estimate_rhs(sym, lam, xi, u, alpha, beta, alpha_t, beta_g)[0]
    scale = _renormalized_scale(lam, alpha, beta)[0]

    best = 0.0
    noise = 0.0
    if sym.joint is None:
        derived = [_with_orders(t.family, alpha, beta, alpha_t).value_and_roundoff(lam[0], xi[0], u[0]) for t in sym.terms]
        coefficients = []
        for term in sym.terms:
            if term.coefficient is None:
                zeros = np.zeros(g.shape[0])
                coefficients.append(None if beta_g.degree == 0 else (zeros, zeros))
            else:
                value, roundoff = left_derivative(term.coefficient, g[:, 0, 0, :], beta_g, with_roundoff=True)
                coefficients.append((np.ravel(value), np.ravel(roundoff)))
        for i in range(g.shape[0]):
            total = 0
            error = 0
            for (value, roundoff), coef in zip(derived, coefficients):
                if coef is None:
                    total = total + value
                    error = error + roundoff
                else:
                    total = total + coef[0][i] * value
                    error = error + np.abs(coef[0][i]) * roundoff + coef[1][i] * np.abs(value)
            best = max(best, float(np.max(np.abs(total) * scale / rhs)))
            noise = max(noise, float(np.max(error * scale / rhs)))
    else:
        gain = stencil_gain(list(beta_g.alpha1) + list(beta_g.alpha2) + [beta_g.alpha3])
        for i in range(g.shape[0]):
            point = g[i, 0, 0, :]

            def at(gs, point=point):
                return _with_orders(sym.family_at(gs), alpha, beta, alpha_t)(lam[0], xi[0], u[0])

            value, roundoff = left_derivative(at, point, beta_g, with_roundoff=True)
            inner = _with_orders(sym.family_at(point), alpha, beta, alpha_t).value_and_roundoff(lam[0], xi[0], u[0])[1]
            best = max(best, float(np.max(np.abs(value) * scale / rhs)))
            noise = max(noise, float(np.max((roundoff + gain * inner) * scale / rhs)))
    if not math.isfinite(best):
        raise NonSmoothSymbolException("Non-finite derivative in the sample", data={"symbol": sym.name})
    return best, noise


def shubin_seminorm(
    sym: LambdaSymbol,
    alpha: tuple[int, ...],
    beta: tuple[int, ...],
    alpha_t: int,
    beta_g: MultiIndex,
    box: Optional[SampleBox] = None,
) -> float:
    """sup |d_xi^alpha d_u^beta dtilde^alpha_t X_g^beta_g a| / weight over the sample."""
    return _seminorm_with_roundoff(sym, alpha, beta, alpha_t, beta_g, box or SampleBox())[0]


class MembershipRow(BaseModel):
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    alpha_t: int
    beta_g: tuple[int, ...]
    constant: float
    refined_constant: float
    growth: float
    passed: bool
    g_derivative: bool
    note: str = ""


class MembershipReport(BaseModel):
    name: str
    m: float
    rho: float
    delta: float
    orders: tuple[int, int, int]
    box: dict
    refined_box: dict
    rows: list[MembershipRow]

    @property
    def verdict(self) -> bool:
        return all(row.passed for row in self.rows)

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            record = row.dict()
            for key in ("alpha", "beta", "beta_g"):
                record[key] = ",".join(str(k) for k in record[key])
            out.append(record)
        return out


def _growth(constant: float, refined: float, floor: float = 1e-12, refined_floor: Optional[float] = None) -> float:
    """Relative growth of a constant under refinement. Constants below their
    floor are indistinguishable from roundoff: a refined value there is no growth."""
    refined_floor = floor if refined_floor is None else refined_floor
    if refined <= refined_floor:
        return 0.0
    return refined / max(constant, floor) - 1


def _roundoff_floor(noise: float) -> float:
    return max(1e-12, config.ROUNDOFF_FACTOR * noise)


def membership(
    sym: LambdaSymbol,
    max_orders: tuple[int, int, int] = (4, 2, 2),
    box: Optional[SampleBox] = None,
    growth_tol: Optional[float] = None,
) -> MembershipReport:
    """Shubin estimates for every (alpha, beta, alpha_t, beta_g) with
    |alpha| + |beta| <= a, [beta_g] <= b, alpha_t <= c, on a box and its refinement.

    A row passes when its constant stays within ``growth_tol`` under refinement,
    or when the refined constant is within the roundoff of the stencils.
    """
    box = box or SampleBox()
    refined = box.refined()
    growth_tol = config.TOLERANCES["refinement_growth"] if growth_tol is None else growth_tol
    a, b, c = max_orders
    n = sym.n
    rows = []
    phase_orders = [k for k in itertools.product(range(a + 1), repeat=2 * n) if sum(k) <= a]
    for entries, alpha_t, word in itertools.product(phase_orders, range(c + 1), g_words(n, b)):
        alpha, beta = tuple(entries[:n]), tuple(entries[n:])
        g_part = word.degree > 0
        key = dict(alpha=alpha, beta=beta, alpha_t=alpha_t, beta_g=word.alpha1 + word.alpha2 + (word.alpha3,), g_derivative=g_part)
        if g_part and sym.g_independent:
            rows.append(MembershipRow(**key, constant=0.0, refined_constant=0.0, growth=0.0, passed=True, note="g-independent"))
            continue
        try:
            constant, noise = _seminorm_with_roundoff(sym, alpha, beta, alpha_t, word, box)
            refined_constant, refined_noise = _seminorm_with_roundoff(sym, alpha, beta, alpha_t, word, refined)
        except EngineException as exc:
            logger.info("membership: %s at %s: %s", sym.name, key, exc.message)
            rows.append(MembershipRow(**key, constant=math.inf, refined_constant=math.inf, growth=math.inf, passed=False, note=type(exc).__name__))
            continue
        refined_floor = _roundoff_floor(refined_noise)
        growth = _growth(constant, refined_constant, _roundoff_floor(noise), refined_floor)
        rows.append(
            MembershipRow(
                **key,
                constant=constant,
                refined_constant=refined_constant,
                growth=growth,
                passed=math.isfinite(constant) and growth <= growth_tol,
                note="roundoff" if refined_constant <= refined_floor else "",
            )
        )
    report = MembershipReport(
        name=sym.name,
        m=sym.order,
        rho=sym.rho,
        delta=sym.delta,
        orders=max_orders,
        box=box.dict(),
        refined_box=refined.dict(),
        rows=rows,
    )
    logger.info("membership: %s in S^%s_{%s,%s}: %s", sym.name, sym.order, sym.rho, sym.delta, "pass" if report.verdict else "fail")
    return report


# ---------------------------------------------------------------- operator side


class OperatorSeminorm(BaseModel):
    value: float
    truncation_delta: float


def _operator_norm(matrix: np.ndarray) -> float:
    return float(svdvals(matrix)[0]) if matrix.size else 0.0


def operator_seminorm(
    sym: LambdaSymbol,
    a: int,
    b: int,
    c: int,
    lam: float,
    g: Optional[np.ndarray] = None,
    dim: int = config.HERMITE_DIM,
    grid: Optional[Grid] = None,
    tol: Optional[float] = None,
) -> OperatorSeminorm:
    """sup ||pi(I-L)^{(rho[alpha]-m-delta[beta]+gamma)/2} X_g^beta Delta'^alpha sigma pi(I-L)^{-gamma/2}||
    over [alpha] <= a, [beta] <= b, |gamma| <= c, on the first ``dim`` Hermite functions."""
    n = sym.n
    g = np.zeros(2 * n + 1) if g is None else np.asarray(g, dtype=float)
    grid = grid or make_grid(n, config.QUANT_HALF_WIDTH, config.POINTS)
    tol = config.TOLERANCES["truncation"] if tol is None else tol
    best, best_half = 0.0, 0.0
    for alpha, beta in itertools.product(g_words(n, a), g_words(n, b)):
        if beta.degree and sym.g_independent:
            continue

        def evaluator(lam_, xi, u, alpha=alpha, beta=beta):
            return left_derivative(lambda gs: delta_power(alpha, sym.family_at(gs))(lam_, xi, u), g, beta)

        family = SymbolFamily(n=n, evaluator=evaluator)
        op = opw_matrix(family.weyl_symbol(lam, grid), dim, lam=lam)
        for gamma in range(-c, c + 1):
            left = (sym.rho * alpha.degree - sym.order - sym.delta * beta.degree + gamma) / 2
            sandwiched = sandwich_power(op, left, -gamma / 2, n=n).matrix
            best = max(best, _operator_norm(sandwiched))
            best_half = max(best_half, _operator_norm(sandwiched[: dim // 2, : dim // 2]))
    delta = abs(best - best_half) / best if best else 0.0
    if delta > tol:
        raise TruncationException(data={"value": best, "half": best_half, "dim": dim})
    return OperatorSeminorm(value=best, truncation_delta=delta)


# ---------------------------------------------------------------- ellipticity


class EllipticReport(BaseModel):
    passed: bool
    constant: float
    refined_constant: float
    R: float


def _elliptic_constant(sym: LambdaSymbol, R: float, m: float, box: SampleBox) -> float:
    """min |a| / weight^{m/2} over |lambda|(|xi|^2+|u|^2) >= R with |xi|^2+|u|^2 >= 1."""
    g, lam, xi, u = box.arrays(sym.n, with_g=not sym.g_independent)
    radius = np.sum(xi**2, axis=-1) + np.sum(u**2, axis=-1)
    region = (np.abs(lam) * radius >= R) & (radius >= 1)
    if not np.any(region):
        raise ConfigurationException("Ellipticity region is empty on the sample", data={"R": R, "box": box.dict()})
    scale = weight(lam, xi, u) ** (m / 2)
    best = math.inf
    for i in range(g.shape[0]):
        values = np.abs(sym.evaluate(g[i : i + 1], lam, xi, u)) / scale
        values = np.broadcast_to(values, np.broadcast_shapes(values.shape, region.shape))
        best = min(best, float(np.min(values[np.broadcast_to(region, values.shape)])))
    return best


def elliptic_check(
    sym: LambdaSymbol,
    R: float,
    box: Optional[SampleBox] = None,
    m: Optional[float] = None,
    growth_tol: Optional[float] = None,
) -> EllipticReport:
    box = box or SampleBox()
    m = sym.order if m is None else m
    growth_tol = config.TOLERANCES["refinement_growth"] if growth_tol is None else growth_tol
    constant = _elliptic_constant(sym, R, m, box)
    refined = _elliptic_constant(sym, R, m, box.refined())
    passed = constant > 1e-10 and refined >= (1 - growth_tol) * constant
    logger.info("elliptic_check: %s R=%s C=%.4g refined=%.4g", sym.name, R, constant, refined)
    return EllipticReport(passed=passed, constant=constant, refined_constant=refined, R=R)


# ---------------------------------------------------------------- parametrix


def smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)

    def rise(s):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(s > 0, np.exp(-1 / np.where(s > 0, s, 1.0)), 0.0)

    left, right = rise(x), rise(1 - x)
    return left / (left + right)


def cutoff(R: float, lam, xi, u) -> np.ndarray:
    """Function of q = |lambda|(|xi|^2+|u|^2) / (R'(1+|lambda|)) with R' = max(R, 1):
    0 for q <= 1, 1 for q >= 3.

    Its support lies where |lambda|(|xi|^2+|u|^2) >= R and |xi|^2+|u|^2 >= 1, and
    there 1 + |lambda|(|xi|^2+|u|^2) is at least half the weight.
    """
    lam = np.abs(np.asarray(lam, dtype=float))
    radius = np.sum(np.asarray(xi) ** 2, axis=-1) + np.sum(np.asarray(u) ** 2, axis=-1)
    q = lam * radius / (max(R, 1.0) * (1 + lam))
    return smooth_step((q - 1) / 2)


def cutoff_symbol(n: int, R: float) -> LambdaSymbol:
    family = SymbolFamily(n=n, evaluator=lambda lam, xi, u: cutoff(R, lam, xi, u) + 0j)
    return LambdaSymbol(n=n, order=0, name=f"cutoff(R={R})", terms=[SymbolTerm(family=family)])


def _safe_quotient(chi, a):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(chi == 0, 0, chi / np.where(a == 0, 1, a))


def parametrix_leading(sym: LambdaSymbol, R: float, box: Optional[SampleBox] = None) -> LambdaSymbol:
    """b = chi_R / a, of order -m."""
    report = elliptic_check(sym, R, box)
    if not report.passed:
        raise EllipticityException(data=report.dict())
    n = sym.n
    if sym.g_independent:
        family = sym.family()
        inverse = SymbolFamily(
            n=n,
            evaluator=lambda lam, xi, u: _safe_quotient(cutoff(R, lam, xi, u), family(lam, xi, u)),
            lambda_band=family.lambda_band,
        )
        return LambdaSymbol(
            n=n, order=-sym.order, rho=sym.rho, delta=sym.delta, name=f"parametrix({sym.name})", params={"R": R},
            terms=[SymbolTerm(family=inverse)],
        )
    return LambdaSymbol(
        n=n, order=-sym.order, rho=sym.rho, delta=sym.delta, name=f"parametrix({sym.name})", params={"R": R},
        joint=lambda g, lam, xi, u: _safe_quotient(cutoff(R, lam, xi, u), sym.evaluate(g, lam, xi, u)),
    )


# ---------------------------------------------------------------- built-ins


def _family(n: int, func) -> SymbolFamily:
    return SymbolFamily(n=n, evaluator=lambda lam, xi, u: np.asarray(func(np.asarray(lam), xi, u), dtype=complex))


def _root(lam):
    return np.sqrt(np.abs(lam))


def _signed(lam):
    return np.sign(lam) * np.sqrt(np.abs(lam))


def _square(xi, u):
    return np.sum(xi**2, axis=-1) + np.sum(u**2, axis=-1)


def _field_family(n: int, which: str) -> tuple[SymbolFamily, float]:
    kind, j = parse_field(which)
    if kind != "T" and j >= n:
        raise ConfigurationException(f"{which} does not exist on H_{n}")
    if kind == "X":
        return _family(n, lambda lam, xi, u: 1j * _root(lam) * xi[..., j] + 0 * u[..., j]), 1
    if kind == "Y":
        return _family(n, lambda lam, xi, u: 1j * _signed(lam) * u[..., j] + 0 * xi[..., j]), 1
    return _family(n, lambda lam, xi, u: 1j * lam + 0 * (xi[..., 0] + u[..., 0])), 2


def _xy_t_family(m: int, m0: int, variant: str) -> SymbolFamily:
    mx, my = (m, m0) if variant == "X" else (m0, m)

    def func(lam, xi, u):
        return (1j * _root(lam) * xi[..., 0]) ** mx + 1j * (1j * _signed(lam) * u[..., 0]) ** my + (1j * lam) ** (m0 // 2)

    return _family(1, func)


def builtin_symbols(name: str, params: Optional[dict] = None, n: int = 1) -> LambdaSymbol:
    """Symbols by name: one, X<j>, Y<j>, T, L, I-L, XY-T, f1-f2L, sin-inv-lambda."""
    params = dict(params or {})
    rho, delta = float(params.pop("rho", 1.0)), float(params.pop("delta", 0.0))
    declared = params.pop("m_class", None)

    def build(order, terms, **extra):
        order = order if declared is None else float(declared)
        return LambdaSymbol(n=n, order=order, rho=rho, delta=delta, name=name, params={**params, **extra}, terms=terms)

    if name == "one":
        return build(0, [SymbolTerm(family=_family(n, lambda lam, xi, u: np.ones(np.broadcast_shapes(np.shape(lam), xi.shape[:-1], u.shape[:-1]))))])
    if name in ("L", "I-L"):
        shift = 1.0 if name == "I-L" else 0.0
        sign = 1.0 if name == "I-L" else -1.0
        return build(2, [SymbolTerm(family=_family(n, lambda lam, xi, u: shift + sign * np.abs(lam) * _square(xi, u)))])
    if name == "XY-T":
        m, m0 = int(params.get("m", 2)), int(params.get("m0", 2))
        variant = str(params.get("variant", "X")).upper()
        if n != 1:
            raise ConfigurationException("XY-T is defined on H_1 only")
        if m % 2 or m0 % 2 or m0 <= 0 or m < m0:
            raise ConfigurationException("XY-T needs even m >= m0 > 0", data={"m": m, "m0": m0})
        if variant not in ("X", "Y"):
            raise ConfigurationException("XY-T variant must be X or Y")
        return build(m, [SymbolTerm(family=_xy_t_family(m, m0, variant))], m=m, m0=m0, variant=variant)
    if name == "f1-f2L":
        c1, s1, c2 = float(params.get("c1", 1.0)), float(params.get("s1", 0.0)), float(params.get("c2", 1.0))
        one = _family(n, lambda lam, xi, u: np.ones(np.broadcast_shapes(np.shape(lam), xi.shape[:-1], u.shape[:-1])))
        radial = _family(n, lambda lam, xi, u: np.abs(lam) * _square(xi, u)).scaled(c2)
        if s1 == 0:
            first = SymbolTerm(family=one.scaled(c1))
        else:
            first = SymbolTerm(family=one, coefficient=lambda g: c1 + s1 * np.sin(g[..., 0]))
        return build(2, [first, SymbolTerm(family=radial)], c1=c1, s1=s1, c2=c2)
    if name == "sin-inv-lambda":
        return build(0, [SymbolTerm(family=_family(n, lambda lam, xi, u: np.sin(1 / lam) + 0 * _square(xi, u)))])
    family, order = _field_family(n, name)
    return build(order, [SymbolTerm(family=family)])


# ---------------------------------------------------------------- variable coefficients


def variable_coeff_condition(
    f1: Coefficient,
    f2: Coefficient,
    Lambda: float,
    box: Optional[SampleBox] = None,
    n: int = 1,
    derivative_order: int = 1,
    growth_tol: Optional[float] = None,
) -> tuple[bool, float]:
    """inf over sampled g and lambda >= Lambda of |f1 + f2 lambda| / (1 + lambda), and
    boundedness of the X-derivatives of f1 and f2 under refinement of the g-sample."""
    box = box or SampleBox()
    growth_tol = config.TOLERANCES["refinement_growth"] if growth_tol is None else growth_tol
    g = box.group_points(n)
    lams = np.concatenate([[Lambda], np.geomspace(max(Lambda, box.lam_min), box.lam_max * 4, 4 * box.lam_points)])
    ratio = np.abs(f1(g)[:, None] + f2(g)[:, None] * lams[None, :]) / (1 + lams[None, :])
    infimum = float(np.min(ratio))

    bounded = True
    refined_g = box.refined().group_points(n)
    for word in g_words(n, derivative_order)[1:]:
        for f in (f1, f2):
            coarse, coarse_noise = left_derivative(f, g, word, with_roundoff=True)
            fine, fine_noise = left_derivative(f, refined_g, word, with_roundoff=True)
            coarse, fine = float(np.max(np.abs(coarse))), float(np.max(np.abs(fine)))
            floors = _roundoff_floor(float(np.max(coarse_noise))), _roundoff_floor(float(np.max(fine_noise)))
            if not math.isfinite(fine) or _growth(coarse, fine, *floors) > growth_tol:
                bounded = False
    passed = infimum > 1e-10 and bounded
    logger.info("variable_coeff_condition: Lambda=%s inf=%.4g bounded=%s", Lambda, infimum, bounded)
    return passed, infimum


# ---------------------------------------------------------------- identity table


class IdentityRow(BaseModel):
    identity: str
    lam: float
    max_error: float
    passed: bool


class IdentityReport(BaseModel):
    n: int
    tol: float
    rows: list[IdentityRow]

    @property
    def verdict(self) -> bool:
        return all(row.passed for row in self.rows)

    def records(self) -> list[dict]:
        return [row.dict() for row in self.rows]


def _polynomial_family(n: int) -> SymbolFamily:
    """Polynomial in (lambda, xi_1, u_1) used for the renormalisation checks."""

    def func(lam, xi, u):
        x, y = xi[..., 0], u[..., 0]
        return lam**2 * x**2 * y + 1j * lam * x * y**2 + x**3 - 2j * y + lam

    return _family(n, func)


def _table_cases(n: int) -> list[tuple[str, Callable, Callable]]:
    fields = {name: builtin_symbols(name, n=n).family() for name in [f"X{j + 1}" for j in range(n)] + [f"Y{j + 1}" for j in range(n)] + ["T", "L"]}
    one = lambda lam, xi, u: np.ones(xi.shape[:-1])
    zero = lambda lam, xi, u: np.zeros(xi.shape[:-1])
    cases = []
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            expected = (lambda lam, xi, u: -one(lam, xi, u)) if j == k else zero
            cases.append((f"Delta_x{j} X{k} = -delta_jk I", delta_x(j, fields[f"X{k}"]), expected))
            cases.append((f"Delta_x{j} Y{k} = 0", delta_x(j, fields[f"Y{k}"]), zero))
            cases.append((f"Delta_y{j} X{k} = 0", delta_y(j, fields[f"X{k}"]), zero))
            cases.append((f"Delta_y{j} Y{k} = -delta_jk I", delta_y(j, fields[f"Y{k}"]), expected))
        cases.append((f"Delta_x{j} T = 0", delta_x(j, fields["T"]), zero))
        cases.append((f"Delta_y{j} T = 0", delta_y(j, fields["T"]), zero))
        cases.append((f"Delta_x{j} L = -2 X{j}", delta_x(j, fields["L"]), fields[f"X{j}"].scaled(-2)))
        cases.append((f"Delta_y{j} L = -2 Y{j}", delta_y(j, fields["L"]), fields[f"Y{j}"].scaled(-2)))
    cases.append(("Delta_t T = -I", delta_t(fields["T"]), lambda lam, xi, u: -one(lam, xi, u)))
    cases.append(("Delta_t L = 0", delta_t(fields["L"]), zero))

    sample = _polynomial_family(n)
    tilde = renormalize(sample)
    zero_index = MultiIndex.zero(n)

    def renormalized_point(lam, xi, u):
        return _root(lam)[..., None] * xi, _signed(lam)[..., None] * u

    def renormalised_lambda(lam, xi, u):
        xr, ur = renormalized_point(lam, xi, u)
        return plain_partial(tilde, 2 * n, lam, xr, ur)

    def renormalised_xi(lam, xi, u):
        xr, ur = renormalized_point(lam, xi, u)
        return plain_partial(tilde, 0, lam, xr, ur)

    def renormalised_u(lam, xi, u):
        xr, ur = renormalized_point(lam, xi, u)
        return plain_partial(tilde, n, lam, xr, ur)

    cases.append(("tilde_partial a = d_lambda a~ (renormalised)", lambda lam, xi, u: tilde_partial_literal(sample, lam, xi, u), renormalised_lambda))
    cases.append(("d_xi1 a / sqrt|lambda| = d_xi1 a~ (renormalised)", lambda lam, xi, u: plain_partial(sample, 0, lam, xi, u) / _root(lam), renormalised_xi))
    cases.append(("d_u1 a / sqrt(lambda) = d_u1 a~ (renormalised)", lambda lam, xi, u: plain_partial(sample, n, lam, xi, u) / _signed(lam), renormalised_u))
    cases.append(("Delta^0 a = a", delta_power(zero_index, sample), sample))
    return cases


def identity_table(
    n: int = 1,
    lams: tuple[float, ...] = (-4.0, -1.0, -0.25, 0.25, 1.0, 4.0),
    box: Optional[SampleBox] = None,
    tol: Optional[float] = None,
) -> IdentityReport:
    """Difference-operator identities on the built-in fields, the renormalisation
    identities on a polynomial symbol, and the trivial multi-index, as max pointwise errors."""
    box = box or SampleBox()
    tol = config.TOLERANCES["identity"] if tol is None else tol
    xi, u = box.phase_points(n)
    rows = []
    for name, lhs, rhs in _table_cases(n):
        for lam in lams:
            lam_arr = np.full(xi.shape[:-1], float(lam))
            error = float(np.max(np.abs(np.asarray(lhs(lam_arr, xi, u)) - np.asarray(rhs(lam_arr, xi, u)))))
            rows.append(IdentityRow(identity=name, lam=float(lam), max_error=error, passed=error <= tol))
    report = IdentityReport(n=n, tol=tol, rows=rows)
    logger.info("identity_table: n=%d rows=%d worst=%.3g", n, len(rows), max(r.max_error for r in rows))
    return report
