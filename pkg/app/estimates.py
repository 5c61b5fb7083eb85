"""Empirical checks of the estimates the existence theory relies on.

Semigroup L^q -> L^r decay, the Cordoba-Cordoba inequality for powered
cutoffs, the pointwise |u|^p difference bound, epsilon-Young and
contractivity.  ``verify_suite`` bundles the randomized checks behind one
seed.
"""

import logging
import math
import warnings
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress

from app.capacity import cutoff_ramp
from app.errors import DomainError, FitError, ResolutionWarning, WindowError
from app.field import Field, radius
from app.models import (
    CheckResult,
    DecayFit,
    Grid,
    InequalityReport,
    OperatorParams,
    VerifyReport,
)
from app.operator import apply_operator, apply_semigroup
from app.solver import power_nonlinearity

logger = logging.getLogger(__name__)

# Aliasing guard: energy allowed in the top third of the spectrum
ALIASING_TOL = 1e-6
NORM_FLOOR = 1e-300
CONTRACTIVITY_TOL = 1e-6
CORDOBA_TOL = 1e-6
PAIRWISE_TOL = 1e-12


def _inv(q: float) -> float:
    return 0.0 if math.isinf(q) else 1.0 / q


def theory_slope(d: int, s: float, q: float, r: float) -> float:
    """-(d/2s)(1/q - 1/r)."""
    return -(d / (2.0 * s)) * (_inv(q) - _inv(r))


def kernel_width(params: OperatorParams, t: float, d: int) -> float:
    """max(sqrt(2 a t d), (b t)^{1/(2s)}): spread of the kernel at time t."""
    local = math.sqrt(2.0 * params.a * t * d)
    nonlocal_ = (params.b * t) ** (1.0 / (2.0 * params.s)) if params.b > 0 else 0.0
    return max(local, nonlocal_)


def probe_resolved(probe: Field) -> bool:
    return probe.spectral_tail_fraction() < ALIASING_TOL


def _check_exponents(q: float, r: float) -> None:
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if r < q:
        raise DomainError(f"r must be >= q, got q={q}, r={r}")


# ---------------------------------------------------------------------------
# Semigroup decay
# ---------------------------------------------------------------------------


def _decay_ratios(
    params: OperatorParams, q: float, r: float, probe: Field, t_grid: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Times inside the boundary-free window and ||e^{-tL} probe||_r / ||probe||_q there."""
    _check_exponents(q, r)
    base = probe.lp_norm(q)
    if base == 0:
        raise DomainError("probe must be nonzero")
    if not probe_resolved(probe):
        msg = f"probe fails the aliasing guard (tail {probe.spectral_tail_fraction():.2e})"
        logger.warning(msg)
        warnings.warn(msg, ResolutionWarning, stacklevel=3)

    limit = probe.grid.box_length / 4.0
    times, ratios = [], []
    for t in sorted(t_grid):
        if t <= 0:
            raise DomainError(f"times must be positive, got {t}")
        if kernel_width(params, t, probe.grid.d) > limit:
            logger.debug("t=%g excluded: kernel wider than box/4", t)
            continue
        norm = apply_semigroup(probe, params, t).lp_norm(r)
        if norm < NORM_FLOOR:
            raise WindowError(f"||e^(-tL) probe||_{r:g} underflowed at t={t:g}")
        times.append(t)
        ratios.append(norm / base)
    return np.array(times), np.array(ratios)


def decay_fit(
    params: OperatorParams, q: float, r: float, probe: Field, t_grid: Sequence[float]
) -> DecayFit:
    """Log-log slope of ||e^{-tL} probe||_r / ||probe||_q against t."""
    times, ratios = _decay_ratios(params, q, r, probe, t_grid)
    if len(times) < 3:
        raise FitError(f"only {len(times)} times inside the boundary-free window")
    fit = linregress(np.log(times), np.log(ratios))
    theory = theory_slope(probe.grid.d, params.s, q, r)
    slope = float(fit.slope)
    rel = abs(slope - theory) / abs(theory) if theory != 0 else abs(slope)
    return DecayFit(
        q=q,
        r=r,
        t_window=(float(times[0]), float(times[-1])),
        fitted_slope=slope,
        theory_slope=theory,
        rel_error=rel,
        stderr=float(fit.stderr),
        points=len(times),
    )


def smoothing_constants(
    params: OperatorParams,
    q: float,
    r: float,
    probes: dict[str, Field],
    t_grid: Sequence[float],
) -> dict[str, float]:
    """Smallest C per probe with ||e^{-tL} probe||_r <= C t^{theory} ||probe||_q on the window."""
    out = {}
    for name, probe in probes.items():
        times, ratios = _decay_ratios(params, q, r, probe, t_grid)
        if len(times) == 0:
            raise FitError(f"no times inside the boundary-free window for probe {name!r}")
        theory = theory_slope(probe.grid.d, params.s, q, r)
        out[name] = float(np.max(ratios * times ** (-theory)))
    return out


# ---------------------------------------------------------------------------
# Pointwise inequalities
# ---------------------------------------------------------------------------


def cordoba_check(base: Field, s: float, l: float) -> float:
    """Largest positive part of (-Lap)^s[base^l] - l base^{l-1} (-Lap)^s[base]."""
    if l < 1:
        raise DomainError(f"l must be >= 1, got {l}")
    if base.samples.min() < -1e-12:
        raise DomainError("cutoff base must be nonnegative")
    frac = OperatorParams(a=0.0, b=1.0, s=s)
    b = np.clip(base.samples, 0.0, None)
    lhs = apply_operator(Field(base.grid, b**l), frac).samples
    rhs = l * b ** (l - 1.0) * apply_operator(Field(base.grid, b), frac).samples
    return float(max(np.max(lhs - rhs), 0.0))


def pointwise_inequality_suite(u: Field, v: Field, p: float) -> InequalityReport:
    """Violations of ||u|^p - |v|^p| <= p|u-v|(|u|^{p-1} + |v|^{p-1}) and of
    || |u|^p ||_r <= ||u||_inf^{p-1} ||u||_r for r in {1, 2}.

    The pointwise bound is reported as an absolute difference, the norm
    bound relative to its right side.
    """
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    a, b = u.samples, v.samples
    lhs = np.abs(power_nonlinearity(a, p) - power_nonlinearity(b, p))
    rhs = p * np.abs(a - b) * (power_nonlinearity(a, p - 1.0) + power_nonlinearity(b, p - 1.0))
    qwe = float(np.max(lhs - rhs))

    powered = Field(u.grid, power_nonlinearity(a, p))
    sup = u.lp_norm(np.inf)
    product = -math.inf
    for r in (1, 2):
        bound = sup ** (p - 1.0) * u.lp_norm(r)
        gap = powered.lp_norm(r) - bound
        product = max(product, gap / bound if bound > 0 else gap)
    return InequalityReport(
        qwe_violation=qwe, product_violation=product, max_violation=max(qwe, product)
    )


def young_check(
    rng: np.random.Generator,
    cases: int,
    *,
    eps_values: Sequence[float] = (0.1, 0.25),
    p_values: Sequence[float] = (1.5, 2.0, 3.0),
) -> CheckResult:
    """A*B <= eps A^p w + C(eps) B^{p/(p-1)} w^{-1/(p-1)}, C(eps) = (eps p)^{-1/(p-1)} (p-1)/p."""
    worst = -math.inf
    for _ in range(cases):
        A, B, w = np.exp(rng.normal(0.0, 1.0, size=(3, 64)))
        for p in p_values:
            for eps in eps_values:
                C = (eps * p) ** (-1.0 / (p - 1.0)) * (p - 1.0) / p
                rhs = eps * A**p * w + C * B ** (p / (p - 1.0)) * w ** (-1.0 / (p - 1.0))
                worst = max(worst, float(np.max((A * B - rhs) / rhs)))
    return CheckResult(
        name="young",
        cases=cases,
        max_violation=worst,
        tolerance=PAIRWISE_TOL,
        passed=worst <= PAIRWISE_TOL,
    )


def contractivity_check(
    rng: np.random.Generator,
    cases: int,
    *,
    params: Optional[OperatorParams] = None,
    times: Sequence[float] = (1.0, 10.0, 100.0),
) -> CheckResult:
    """||e^{-tL} u||_q <= ||u||_q for q in {1, 2, inf} on random fields (h = 0.1).

    Without explicit ``params`` each case draws b and s at random with a = 1.
    """
    grid = Grid(d=1, n=512, box_length=51.2)
    worst = -math.inf
    for _ in range(cases):
        op = params or OperatorParams(a=1.0, b=float(rng.uniform(0.0, 1.0)), s=float(rng.uniform(0.1, 0.9)))
        u = Field(grid, rng.standard_normal(grid.n))
        for t in times:
            out = apply_semigroup(u, op, t)
            for q in (1.0, 2.0, math.inf):
                worst = max(worst, out.lp_norm(q) / u.lp_norm(q) - 1.0)
    return CheckResult(
        name="contractivity",
        cases=cases,
        max_violation=worst,
        tolerance=CONTRACTIVITY_TOL,
        passed=worst <= CONTRACTIVITY_TOL,
    )


def _cordoba_cases(rng: np.random.Generator, cases: int) -> CheckResult:
    grid = Grid(d=1, n=1024, box_length=64.0)
    worst = -math.inf
    for _ in range(cases):
        R = float(rng.uniform(4.0, 12.0))
        s = float(rng.uniform(0.1, 0.9))
        l = float(rng.uniform(1.0, 6.0))
        base = Field(grid, cutoff_ramp(radius(grid) / R))
        scale = apply_operator(
            Field(grid, base.samples**l), OperatorParams(a=0.0, b=1.0, s=s)
        ).lp_norm(np.inf)
        worst = max(worst, cordoba_check(base, s, l) / scale)
    return CheckResult(
        name="cordoba", cases=cases, max_violation=worst, tolerance=CORDOBA_TOL, passed=worst <= CORDOBA_TOL
    )


def _pointwise_cases(rng: np.random.Generator, cases: int) -> CheckResult:
    grid = Grid(d=1, n=256, box_length=32.0)
    worst = -math.inf
    p_values = (1.5, 2.0, 3.0)
    for i in range(cases):
        scale = float(np.exp(rng.uniform(-2.0, 1.0)))
        u = Field(grid, scale * rng.uniform(-1.0, 1.0, grid.n))
        v = Field(grid, scale * rng.uniform(-1.0, 1.0, grid.n))
        report = pointwise_inequality_suite(u, v, p_values[i % len(p_values)])
        worst = max(worst, report.max_violation)
    return CheckResult(
        name="qwe_product", cases=cases, max_violation=worst, tolerance=PAIRWISE_TOL, passed=worst <= PAIRWISE_TOL
    )


def verify_suite(seed: int, cases: int = 100) -> VerifyReport:
    """Cordoba, pointwise/product, epsilon-Young and contractivity on seeded random cases."""
    rng = np.random.default_rng(seed)
    checks = [
        _cordoba_cases(rng, cases),
        _pointwise_cases(rng, cases),
        young_check(rng, cases),
        contractivity_check(rng, cases),
    ]
    for c in checks:
        logger.info(
            "verify %s: %d cases, max violation %.3e (tol %.0e) %s",
            c.name,
            c.cases,
            c.max_violation,
            c.tolerance,
            "ok" if c.passed else "FAILED",
        )
    return VerifyReport(seed=seed, checks=checks)
