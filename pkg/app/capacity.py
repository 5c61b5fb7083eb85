"""Test-function machinery of the capacity (rescaled test function) method.

The cutoff ramp nu is 1 on [0, 1/2], 0 on [1, inf) and in between

    nu(r) = 1 / (1 + exp(h(r))),   h(r) = 1/(2(1 - r)) - 1/(2r - 1),

which is the e^{-1/x} mollifier ramp written in logistic form.  All
quotients |num|^{p'} * base^{-1/(p-1)} are formed from logarithms so the
collar near r = 1 never underflows into 0/0.
"""

import logging
import math
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydanticField
from scipy.interpolate import CubicSpline
from scipy.special import gamma as Gamma
from scipy.stats import linregress

from app.errors import (
    CutoffConstructionError,
    DomainError,
    FitError,
    RangeError,
)
from app.exponents import forcing_critical_exponent
from app.field import Field, radius
from app.models import (
    CapacityReport,
    CriticalRow,
    FujitaRow,
    FujitaTable,
    Grid,
    GrowthCheck,
    NonexistenceRow,
    NonexistenceTable,
    OperatorParams,
    ScalingFit,
)
from app.operator import apply_operator, symbol_grid
from app.solver import Trajectory, power_nonlinearity

logger = logging.getLogger(__name__)

# Numerators below this fraction of their sup count as zero where the base vanishes
ZERO_NUMERATOR_TOL = 1e-10
# Relative change of the forcing column between the last two radii that counts as converged
CONVERGED_CHANGE = 0.05
RADIAL_NODES = 10_000

OperatorForm = Literal["majorant", "exact"]


# ---------------------------------------------------------------------------
# Cutoff ramp
# ---------------------------------------------------------------------------


def _ramp_region(r: np.ndarray) -> np.ndarray:
    return (r > 0.5) & (r < 1.0)


def _ramp_h(r: np.ndarray) -> np.ndarray:
    return 1.0 / (2.0 * (1.0 - r)) - 1.0 / (2.0 * r - 1.0)


def _log_ramp(r) -> tuple[np.ndarray, np.ndarray]:
    """(log nu, log(1 - nu)), with -inf where the value is exactly 0."""
    r = np.asarray(r, dtype=float)
    shape = r.shape
    r = r.reshape(-1)
    inside = _ramp_region(r)
    log_nu = np.where(r >= 1.0, -np.inf, 0.0)
    log_rest = np.where(r <= 0.5, -np.inf, 0.0)
    h = _ramp_h(r[inside])
    soft = np.logaddexp(0.0, h)
    log_nu[inside] = -soft
    log_rest[inside] = h - soft
    return log_nu.reshape(shape), log_rest.reshape(shape)


def cutoff_ramp(r) -> np.ndarray:
    """nu(r)."""
    return np.exp(_log_ramp(r)[0])


def _ramp_derivatives(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """nu, nu', nu'' (zero outside the ramp)."""
    r = np.asarray(r, dtype=float)
    log_nu, log_rest = _log_ramp(r)
    nu = np.exp(log_nu)
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    inside = _ramp_region(r)
    ri = r[inside]
    hp = 1.0 / (2.0 * (1.0 - ri) ** 2) + 2.0 / (2.0 * ri - 1.0) ** 2
    hpp = (1.0 - ri) ** -3 - 8.0 * (2.0 * ri - 1.0) ** -3
    nu_i = nu[inside]
    # nu * (1 - nu) from logs so both ends stay representable
    w = np.exp(log_nu[inside] + log_rest[inside])
    d1[inside] = -w * hp
    d2[inside] = w * (1.0 - 2.0 * nu_i) * hp**2 - w * hpp
    return nu, d1, d2


def _log_abs_ramp_slope(r: np.ndarray) -> np.ndarray:
    """log|nu'(r)|, -inf off the ramp."""
    r = np.asarray(r, dtype=float)
    shape = r.shape
    r = r.reshape(-1)
    log_nu, log_rest = _log_ramp(r)
    out = np.full(r.shape, -np.inf)
    inside = _ramp_region(r)
    ri = r[inside]
    hp = 1.0 / (2.0 * (1.0 - ri) ** 2) + 2.0 / (2.0 * ri - 1.0) ** 2
    out[inside] = log_nu[inside] + log_rest[inside] + np.log(hp)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


class CutoffPair(BaseModel):
    """eta(t) = nu^l(t/T) and phi(x) = Psi^l(|x|/R), Psi = nu, l = 2p/(p-1)."""

    model_config = ConfigDict(frozen=True)

    T: float = PydanticField(..., gt=0, description="Time scale")
    R: float = PydanticField(..., gt=0, description="Space scale")
    p: float = PydanticField(..., gt=1)
    l: float = PydanticField(..., description="Cutoff power 2p/(p-1)")

    @property
    def conjugate(self) -> float:
        return self.p / (self.p - 1.0)

    def eta(self, t) -> np.ndarray:
        return np.exp(self.l * _log_ramp(np.asarray(t, dtype=float) / self.T)[0])

    def eta_prime(self, t) -> np.ndarray:
        r = np.asarray(t, dtype=float) / self.T
        log_nu, _ = _log_ramp(r)
        slope = _log_abs_ramp_slope(r)
        with np.errstate(invalid="ignore"):
            out = -np.exp((self.l - 1.0) * log_nu + slope) * self.l / self.T
        return np.where(np.isfinite(out), out, 0.0)

    def psi(self, r) -> np.ndarray:
        return cutoff_ramp(np.asarray(r, dtype=float) / self.R)

    def phi(self, r) -> np.ndarray:
        """phi as a function of |x|."""
        return np.exp(self.l * _log_ramp(np.asarray(r, dtype=float) / self.R)[0])

    def __call__(self, t, r) -> np.ndarray:
        return self.eta(t) * self.phi(r)

    def phi_field(self, grid: Grid) -> Field:
        return Field(grid, self.phi(radius(grid)))

    def psi_field(self, grid: Grid) -> Field:
        return Field(grid, self.psi(radius(grid)))


def build_test_function(T: float, R: float, p: float) -> CutoffPair:
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if T <= 0 or R <= 0:
        raise DomainError(f"T and R must be positive, got T={T}, R={R}")
    return CutoffPair(T=T, R=R, p=p, l=2.0 * p / (p - 1.0))


def _check_ball(grid: Grid, R: float) -> None:
    if R >= 0.5 * grid.box_length:
        raise RangeError(
            f"ball of radius {R:g} does not fit in the box of length {grid.box_length:g}"
        )


# ---------------------------------------------------------------------------
# Capacity integrals
# ---------------------------------------------------------------------------


def quotient_integrand(log_num, log_base, p: float) -> np.ndarray:
    """|num|^{p/(p-1)} * base^{-1/(p-1)} from logarithms, with 0/0 := 0.

    Raises CutoffConstructionError where the numerator is nonzero on the
    zero set of the base (the quotient is not integrable there).
    """
    log_num = np.asarray(log_num, dtype=float)
    log_base = np.asarray(log_base, dtype=float)
    log_num, log_base = np.broadcast_arrays(log_num, log_base)
    vanishing = np.isneginf(log_base)
    offending = vanishing & ~np.isneginf(log_num)
    if np.any(offending):
        raise CutoffConstructionError(
            f"numerator nonzero at {int(offending.sum())} points where the test function vanishes"
        )
    out = np.zeros(log_base.shape)
    live = ~vanishing
    with np.errstate(over="ignore", invalid="ignore"):
        out[live] = np.exp(p / (p - 1.0) * log_num[live] - log_base[live] / (p - 1.0))
    if not np.all(np.isfinite(out)):
        raise CutoffConstructionError("quotient integrand is not finite")
    return out


def _time_factors(pair: CutoffPair, time_nodes: int) -> tuple[float, float]:
    """(integral of |eta'|^{p'} eta^{-1/(p-1)}, integral of eta) over [0, T]."""
    dr = 0.5 / time_nodes
    r = 0.5 + dr * (np.arange(time_nodes) + 0.5)
    log_nu, _ = _log_ramp(r)
    log_slope = math.log(pair.l / pair.T) + (pair.l - 1.0) * log_nu + _log_abs_ramp_slope(r)
    q = quotient_integrand(log_slope, pair.l * log_nu, pair.p)
    slope_part = float(q.sum() * dr * pair.T)
    eta_part = pair.T * (0.5 + float(np.exp(pair.l * log_nu).sum() * dr))
    return slope_part, eta_part


def _operator_quotient(
    pair: CutoffPair, params: OperatorParams, grid: Grid, form: OperatorForm
) -> np.ndarray:
    rho = radius(grid) / pair.R
    log_psi, _ = _log_ramp(rho)
    log_base = pair.l * log_psi

    if form == "exact":
        num = np.abs(apply_operator(pair.phi_field(grid), params).samples)
        num = np.where(num > ZERO_NUMERATOR_TOL * num.max(), num, 0.0)
        with np.errstate(divide="ignore"):
            return quotient_integrand(np.log(num), log_base, pair.p)

    # a|Laplacian phi| + b*l*Psi^{l-1}|(-Laplacian)^s Psi_R|, with Psi^{l-2} factored out
    nu, d1, d2 = _ramp_derivatives(rho)
    inside = _ramp_region(rho)
    radial = np.zeros_like(rho)
    radial[inside] = (grid.d - 1) * d1[inside] / rho[inside]
    stuff = params.a * pair.R**-2 * np.abs(nu * (d2 + radial) + (pair.l - 1.0) * d1**2)
    if params.b > 0:
        frac = OperatorParams(a=0.0, b=1.0, s=params.s)
        nonlocal_part = apply_operator(pair.psi_field(grid), frac).samples
        stuff = stuff + params.b * nu * np.abs(nonlocal_part)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_num = math.log(pair.l) + (pair.l - 2.0) * log_psi + np.log(stuff)
    log_num = np.where(np.isneginf(log_psi), -np.inf, log_num)
    return quotient_integrand(log_num, log_base, pair.p)


def capacity_integrals(
    pair: CutoffPair,
    params: OperatorParams,
    grid: Grid,
    time_nodes: int = 2000,
    *,
    form: OperatorForm = "majorant",
) -> CapacityReport:
    """I1 and I2 of the test function ``pair`` on ``grid``.

    Both integrals factor into a time part and a space part.  The spatial
    I2 integrand uses the pointwise majorant of |L(phi)| by default;
    ``form="exact"`` uses the spectral L(phi) itself, whose quotient is not
    integrable outside the support when b > 0.
    """
    _check_ball(grid, pair.R)
    if time_nodes < 16:
        raise DomainError(f"time_nodes must be >= 16, got {time_nodes}")
    slope_part, eta_part = _time_factors(pair, time_nodes)
    phi_mass = pair.phi_field(grid).integral()
    space_part = float(_operator_quotient(pair, params, grid, form).sum() * grid.cell_volume)

    I1 = phi_mass * slope_part
    I2 = eta_part * space_part
    if not (math.isfinite(I1) and math.isfinite(I2)):
        raise CutoffConstructionError(f"capacity integrals not finite (I1={I1}, I2={I2})")
    return CapacityReport(I1=I1, I2=I2, R=pair.R, T=pair.T)


def _self_similar_grid(d: int, R: float, n: int) -> Grid:
    return Grid(d=d, n=n, box_length=4.0 * R)


def capacity_sweep(
    p: float,
    params: OperatorParams,
    R_list: list[float],
    *,
    d: int,
    n: int = 256,
    time_nodes: int = 2000,
) -> list[CapacityReport]:
    """Capacity integrals along T = R^{2s} on self-similar grids, with local slopes."""
    reports = []
    prev: Optional[CapacityReport] = None
    for R in sorted(R_list):
        pair = build_test_function(R ** (2.0 * params.s), R, p)
        report = capacity_integrals(pair, params, _self_similar_grid(d, R, n), time_nodes)
        if prev is not None and prev.I1 > 0 and report.I1 > 0:
            dlogR = math.log(report.R / prev.R)
            dlogT = math.log(report.T / prev.T)
            report = report.model_copy(
                update={
                    "slope_I1_R": math.log(report.I1 / prev.I1) / dlogR,
                    "slope_I1_T": math.log(report.I1 / prev.I1) / dlogT,
                    "slope_I2_R": (
                        math.log(report.I2 / prev.I2) / dlogR
                        if prev.I2 > 0 and report.I2 > 0
                        else None
                    ),
                }
            )
        reports.append(report)
        prev = report
        logger.debug("capacity R=%g T=%g I1=%.6e I2=%.6e", R, report.T, report.I1, report.I2)
    return reports


def scaling_slopes(
    p: float,
    params: OperatorParams,
    R_list: list[float],
    *,
    d: int,
    n: int = 256,
    time_nodes: int = 2000,
) -> ScalingFit:
    """Log-log slopes of I1/T and I2/T against R under T = R^{2s}.

    Both share the exponent d - 2sp/(p-1) of the nonexistence inequality.
    """
    reports = capacity_sweep(p, params, R_list, d=d, n=n, time_nodes=time_nodes)
    usable = [r for r in reports if r.I1 > 0 and r.I2 > 0]
    if len(usable) < 3:
        raise FitError(f"need at least 3 usable radii for a slope fit, got {len(usable)}")
    logR = np.log([r.R for r in usable])
    fit1 = linregress(logR, np.log([r.I1 / r.T for r in usable]))
    fit2 = linregress(logR, np.log([r.I2 / r.T for r in usable]))
    return ScalingFit(
        slope_I1=float(fit1.slope),
        slope_I2=float(fit2.slope),
        stderr_I1=float(fit1.stderr),
        stderr_I2=float(fit2.stderr),
        expected=d - 2.0 * params.s * p / (p - 1.0),
        reports=reports,
    )


def uniform_bound_constant(R: float, s: float, grid: Grid, *, l: float = 4.0) -> float:
    """sup|(-Laplacian)^s phi_R| * R^{2s}; stable in R for a fixed cutoff shape."""
    _check_ball(grid, R)
    phi = Field(grid, np.exp(l * _log_ramp(radius(grid) / R)[0]))
    frac = apply_operator(phi, OperatorParams(a=0.0, b=1.0, s=s))
    return frac.lp_norm(np.inf) * R ** (2.0 * s)


# ---------------------------------------------------------------------------
# Nonexistence functionals
# ---------------------------------------------------------------------------


def _ball_integral(u: Field, R: float, *, absolute: bool = False) -> float:
    _check_ball(u.grid, R)
    values = np.abs(u.samples) if absolute else u.samples
    return float(values[radius(u.grid) < R].sum() * u.grid.cell_volume)


def _paired(u: Field, pair: CutoffPair) -> float:
    _check_ball(u.grid, pair.R)
    return float((u.samples * pair.phi(radius(u.grid))).sum() * u.grid.cell_volume)


def _strictly_decreasing(values: list[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _vanishing(values: list[float]) -> bool:
    """Identically zero or strictly decreasing."""
    return all(v == 0 for v in values) or _strictly_decreasing(values)


def _converged_positive(values: list[float]) -> bool:
    if len(values) < 2 or values[-1] <= 0:
        return False
    return abs(values[-1] - values[-2]) < CONVERGED_CHANGE * abs(values[-1])


def nonexistence_report(
    u0: Field, f: Field, p: float, params: OperatorParams, R_list: list[float]
) -> NonexistenceTable:
    """Rows (int f phi, R^{-2s} int_{|x|<R} |u0|, R^{d - 2sp/(p-1)}) with T = R^{2s}."""
    if u0.grid != f.grid:
        raise DomainError("u0 and f must live on the same grid")
    s, d = params.s, u0.grid.d
    exponent = d - 2.0 * s * p / (p - 1.0)
    rows = []
    for R in sorted(R_list):
        pair = build_test_function(R ** (2.0 * s), R, p)
        rows.append(
            NonexistenceRow(
                R=R,
                T=pair.T,
                forcing_term=_paired(f, pair),
                initial_term=R ** (-2.0 * s) * _ball_integral(u0, R, absolute=True),
                capacity_term=R**exponent,
            )
        )
    trend = (
        _converged_positive([r.forcing_term for r in rows])
        and _vanishing([r.initial_term for r in rows])
        and _strictly_decreasing([r.capacity_term for r in rows])
        and exponent < 0
    )
    return NonexistenceTable(rows=rows, exponent=exponent, contradiction_trend=trend)


def fujita_report(
    u0: Field, p: float, params: OperatorParams, R_list: list[float]
) -> FujitaTable:
    """Rows (int u0 phi, R^{d - 2s/(p-1)}) for the unforced problem."""
    s, d = params.s, u0.grid.d
    exponent = d - 2.0 * s / (p - 1.0)
    rows = []
    for R in sorted(R_list):
        pair = build_test_function(R ** (2.0 * s), R, p)
        rows.append(
            FujitaRow(R=R, T=pair.T, initial_term=_paired(u0, pair), capacity_term=R**exponent)
        )
    trend = _converged_positive([r.initial_term for r in rows]) and exponent < 0
    return FujitaTable(rows=rows, exponent=exponent, contradiction_trend=trend)


def critical_case_report(
    u0: Field, f: Field, params: OperatorParams, sigma: float, R_list: list[float]
) -> list[CriticalRow]:
    """Rows (R^{-sigma} int f phi, R^{-2s-sigma} int |u0|, R^{-sigma}) at p = p_crit."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    s = params.s
    p = forcing_critical_exponent(u0.grid.d, s)
    rows = []
    for R in sorted(R_list):
        pair = build_test_function(R ** (2.0 * s), R, p)
        rows.append(
            CriticalRow(
                R=R,
                forcing_term=R**-sigma * _paired(f, pair),
                initial_term=R ** (-2.0 * s - sigma) * _ball_integral(u0, R, absolute=True),
                constant_term=R**-sigma,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Growth functional
# ---------------------------------------------------------------------------


def sphere_area(d: int) -> float:
    """Surface area 2 pi^{d/2} / Gamma(d/2) of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / float(Gamma(d / 2.0))


RadialProfile = Callable[[np.ndarray], np.ndarray]


def growth_functional(
    f: Union[Field, RadialProfile], sigma: float, R: float, *, d: Optional[int] = None
) -> float:
    """R^{-sigma} * integral of f over |x| < R.

    ``f`` is either a sampled Field (grid summation) or a radial profile
    g(|x|) integrated with 10^4-node midpoint quadrature in ``d`` dimensions.
    """
    if R <= 0:
        raise DomainError(f"R must be positive, got {R}")
    if isinstance(f, Field):
        return R**-sigma * _ball_integral(f, R)
    if d is None or d < 1:
        raise DomainError("a radial profile needs the dimension d >= 1")
    dr = R / RADIAL_NODES
    r = dr * (np.arange(RADIAL_NODES) + 0.5)
    values = np.broadcast_to(f(r), r.shape)
    mass = sphere_area(d) * float((values * r ** (d - 1)).sum() * dr)
    return R**-sigma * mass


def instantaneous_blowup_check(
    f: Union[Field, RadialProfile], sigma: float, R_list: list[float], *, d: Optional[int] = None
) -> GrowthCheck:
    """Growth functional over increasing R; criterion: sigma > d and a positive limsup.

    The limsup counts as positive when the upper half of the radii shows
    positive values without a decaying power-law trend.
    """
    dim = f.grid.d if isinstance(f, Field) else d
    if dim is None:
        raise DomainError("a radial profile needs the dimension d")
    radii = sorted(R_list)
    values = [growth_functional(f, sigma, R, d=dim) for R in radii]
    upper = values[len(values) // 2 :]
    upper_r = radii[len(radii) // 2 :]
    met = False
    if sigma > dim and len(upper) >= 2 and all(v > 0 for v in upper):
        slope = linregress(np.log(upper_r), np.log(upper)).slope
        met = bool(slope > -0.05)
    return GrowthCheck(sigma=sigma, radii=radii, values=values, criterion_met=met)


# ---------------------------------------------------------------------------
# Weak formulation residual
# ---------------------------------------------------------------------------


def _gauss_panels(times: np.ndarray, T: float, panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, T], ``panels`` per trajectory interval."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = [t for t in times if t < T] + [T]
    pts, wts = [], []
    for lo, hi in zip(edges, edges[1:]):
        cuts = np.linspace(lo, hi, panels + 1)
        for a, b in zip(cuts, cuts[1:]):
            half = 0.5 * (b - a)
            pts.append(a + half * (x + 1.0))
            wts.append(half * w)
    return np.concatenate(pts), np.concatenate(wts)


def weak_residual(
    trajectory: Trajectory,
    pair: CutoffPair,
    f: Field,
    u0: Field,
    p: float,
    params: OperatorParams,
    *,
    panels: int = 8,
    gauss_nodes: int = 32,
) -> float:
    """|int int (|u|^p + f) eta phi + int u0 phi eta(0) - int int u(-d_t(eta phi) + L(eta phi))|.

    Space integrals are grid sums; the three pairings <|u|^p + f, phi>,
    <u, phi> and <u, L phi> are interpolated in time by cubic splines and
    integrated against eta and eta' with panelled Gauss-Legendre rules.
    """
    grid = trajectory.grid
    if u0.grid != grid or f.grid != grid:
        raise DomainError("trajectory, u0 and f must share one grid")
    if trajectory.times[-1] < pair.T * (1.0 - 1e-12):
        raise RangeError(
            f"trajectory ends at {trajectory.times[-1]:g} before the test-function horizon {pair.T:g}"
        )
    if len(trajectory) < 4:
        raise RangeError("trajectory needs at least 4 nodes for spline interpolation")
    _check_ball(grid, pair.R)

    phi = pair.phi_field(grid)
    L_phi = Field.from_spectral(grid, symbol_grid(grid, params) * phi.spectral)
    vol = grid.cell_volume
    axes = tuple(range(1, grid.d + 1))
    states = trajectory.states
    source = power_nonlinearity(states, p) + f.samples
    A = (source * phi.samples).sum(axis=axes) * vol
    B = (states * phi.samples).sum(axis=axes) * vol
    C = (states * L_phi.samples).sum(axis=axes) * vol

    t, w = _gauss_panels(trajectory.times, pair.T, panels, gauss_nodes)
    eta = pair.eta(t)
    eta_p = pair.eta_prime(t)
    lhs = float(np.sum(w * eta * CubicSpline(trajectory.times, A)(t)))
    lhs += float(pair.eta(0.0)) * float((u0.samples * phi.samples).sum() * vol)
    rhs = float(
        np.sum(w * (-eta_p * CubicSpline(trajectory.times, B)(t) + eta * CubicSpline(trajectory.times, C)(t)))
    )
    return abs(lhs - rhs)
