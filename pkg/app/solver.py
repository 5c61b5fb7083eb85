"""Mild solutions of u_t + L_{a,b} u = |u|^p + f.

Short intervals: the Picard map
    (Psi u)(t) = e^{-tL} u0 + int_0^t e^{-(t-tau)L} (|u(tau)|^p + f) dtau
iterated to its fixed point on a uniform node set.  Long horizons: first
order exponential Euler with growth-limited steps, stopped at the blow-up
threshold or the time-step floor.
"""

import logging
import math
from itertools import combinations
from typing import Literal, NamedTuple, Optional

import numpy as np
import scipy.fft
from scipy.stats import linregress

from app.config import settings
from app.errors import (
    ContractionError,
    ConvergenceError,
    DomainError,
    NumericalOverflow,
)
from app.field import Field, forward
from app.models import Grid, NormSample, OperatorParams, SolveOutcome, SolverConfig, Status
from app.operator import phi1_multiplier, semigroup_multiplier, symbol_grid

logger = logging.getLogger(__name__)

# Spectral tail energy above this fraction means the grid no longer resolves u
RESOLUTION_TAIL_TOL = 1e-3
# Runaway growth: sup norm this many times its running minimum, with growth-limited steps
RUNAWAY_FACTOR = 100.0
# Forced runs stay Global while within this factor of the forced linear evolution
BASELINE_FACTOR = 1.5
# Minimum samples in the last decade of growth for a T* fit
MIN_FIT_SAMPLES = 8

Quadrature = Literal["constant", "cubic"]
InitialIterate = Literal["semigroup", "zero", "constant"]


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def power_nonlinearity(values: np.ndarray, p: float) -> np.ndarray:
    """|u|^p as exp(p*log|u|), with |0|^p = 0."""
    a = np.abs(values)
    positive = a > 0
    with np.errstate(over="ignore"):
        return np.where(positive, np.exp(p * np.log(np.where(positive, a, 1.0))), 0.0)


def picard_time_limit(delta: float, p: float) -> float:
    """Largest T with T + 2^p T delta^{p-1} <= 1."""
    return 1.0 / (1.0 + 2.0**p * delta ** (p - 1.0))


def contraction_bound(delta: float, p: float, T: float) -> float:
    """2^{p-1} * p * T * delta^{p-1}: Lipschitz constant of Psi on the ball of radius 2*delta."""
    return 2.0 ** (p - 1.0) * p * T * delta ** (p - 1.0)


def _norm_sample(t: float, u: Field) -> NormSample:
    a = np.abs(u.samples)
    vol = u.grid.cell_volume
    return NormSample(
        t=t,
        l1=float(a.sum() * vol),
        l2=float(np.sqrt((a**2).sum() * vol)),
        linf=float(a.max()),
        mass=u.integral(),
    )


class Trajectory:
    """Node times and stacked node states on one grid."""

    def __init__(self, grid: Grid, times: np.ndarray, states: np.ndarray):
        if states.shape != (len(times), *grid.shape):
            raise DomainError(f"states shape {states.shape} does not match {len(times)} nodes")
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.states = states

    def __len__(self) -> int:
        return len(self.times)

    def at(self, j: int) -> Field:
        return Field(self.grid, self.states[j])

    def final(self) -> Field:
        return self.at(len(self) - 1)

    def sup_distance(self, other: "Trajectory") -> float:
        return float(np.max(np.abs(self.states - other.states)))


class PicardResult(NamedTuple):
    trajectory: Trajectory
    iterations: int
    ratios: list[float]
    distances: list[float]


# ---------------------------------------------------------------------------
# Duhamel weights
# ---------------------------------------------------------------------------


def _phi_functions(z: np.ndarray, count: int, n_roots: int = 32) -> list[np.ndarray]:
    """phi_1..phi_count at real z <= 0 by contour averaging over a unit half circle."""
    roots = np.exp(1j * np.pi * (np.arange(n_roots) + 0.5) / n_roots)
    lr = z[..., None] + roots
    e = np.exp(lr)
    partial = np.ones_like(lr)
    term = np.ones_like(lr)
    out = []
    for j in range(1, count + 1):
        out.append(((e - partial) / lr**j).mean(axis=-1).real)
        term = term * lr / j
        partial = partial + term
    return out


def _lagrange_coefficients(nodes: list[float], k: int) -> np.ndarray:
    """Ascending monomial coefficients of the k-th Lagrange basis polynomial."""
    others = [x for i, x in enumerate(nodes) if i != k]
    denom = np.prod([nodes[k] - x for x in others])
    return np.poly(others)[::-1] / denom


# Stencil node offsets (in steps, relative to the left end of the interval)
_CUBIC_STENCILS = {
    "left": [0.0, 1.0, 2.0, 3.0],
    "interior": [-1.0, 0.0, 1.0, 2.0],
    "right": [-2.0, -1.0, 0.0, 1.0],
}


def _cubic_weights(sigma: np.ndarray, dt: float) -> dict[str, list[np.ndarray]]:
    """Exact exponential weights for cubic interpolation of the source on one step."""
    phis = _phi_functions(-dt * sigma, 4)
    weights = {}
    for shape, nodes in _CUBIC_STENCILS.items():
        ws = []
        for k in range(len(nodes)):
            c = _lagrange_coefficients(nodes, k)
            ws.append(dt * sum(c[i] * math.factorial(i) * phis[i] for i in range(len(c))))
        weights[shape] = ws
    return weights


def _cubic_stencil(j: int, m: int) -> tuple[str, list[int]]:
    if j == 0:
        return "left", [0, 1, 2, 3]
    if j == m - 1:
        return "right", [m - 3, m - 2, m - 1, m]
    return "interior", [j - 1, j, j + 1, j + 2]


# ---------------------------------------------------------------------------
# Picard map
# ---------------------------------------------------------------------------


def _batch_forward(states: np.ndarray, d: int) -> np.ndarray:
    return scipy.fft.rfftn(states, axes=tuple(range(1, d + 1)), workers=settings.fft_workers)


def _batch_inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return scipy.fft.irfftn(
        coeffs, s=grid.shape, axes=tuple(range(1, grid.d + 1)), workers=settings.fft_workers
    )


def picard_small_time(
    u0: Field,
    f: Field,
    p: float,
    params: OperatorParams,
    T: float,
    cfg: SolverConfig,
    *,
    nodes: int = 64,
    quadrature: Quadrature = "constant",
    initial: InitialIterate = "semigroup",
) -> PicardResult:
    """Fixed point of the Picard map on ``nodes`` uniform steps of [0, T].

    ``quadrature="constant"`` uses the phi_1 weight with the interval-averaged
    nonlinearity (second order); ``"cubic"`` interpolates the nonlinearity by
    local cubics and integrates them exactly against the semigroup (fourth
    order).
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    if quadrature == "cubic" and nodes < 3:
        raise DomainError("cubic quadrature needs at least 3 steps")
    grid = u0.grid
    delta = max(u0.lp_norm(np.inf), f.lp_norm(np.inf))
    if delta > 0 and T > picard_time_limit(delta, p):
        logger.warning(
            "T=%g exceeds the smallness limit %.4g for delta=%.4g; relying on measured ratios",
            T,
            picard_time_limit(delta, p),
            delta,
        )

    m = nodes
    dt = T / m
    times = np.linspace(0.0, T, m + 1)
    step = semigroup_multiplier(params, grid, dt)

    linear = np.empty((m + 1, *u0.spectral.shape), dtype=complex)
    linear[0] = u0.spectral
    for j in range(m):
        linear[j + 1] = step * linear[j]

    if quadrature == "cubic":
        cubic = _cubic_weights(symbol_grid(grid, params), dt)
    else:
        half_phi = 0.5 * phi1_multiplier(params, grid, dt)

    if initial == "semigroup":
        states = _batch_inverse(linear, grid)
    elif initial == "zero":
        states = np.zeros((m + 1, *grid.shape))
    elif initial == "constant":
        states = np.full((m + 1, *grid.shape), delta)
    else:
        raise DomainError(f"unknown initial iterate {initial!r}")

    ratios: list[float] = []
    distances: list[float] = []
    above_one = 0
    for iteration in range(1, cfg.picard_max_iter + 1):
        source = _batch_forward(power_nonlinearity(states, p) + f.samples, grid.d)
        duhamel = np.zeros_like(linear)
        for j in range(m):
            if quadrature == "cubic":
                shape, idx = _cubic_stencil(j, m)
                increment = sum(w * source[i] for w, i in zip(cubic[shape], idx))
            else:
                increment = half_phi * (source[j] + source[j + 1])
            duhamel[j + 1] = step * duhamel[j] + increment
        updated = _batch_inverse(linear + duhamel, grid)

        dist = float(np.max(np.abs(updated - states)))
        if not math.isfinite(dist):
            raise ConvergenceError(f"Picard iterate became non-finite at iteration {iteration}")
        if distances:
            ratio = dist / distances[-1] if distances[-1] > 0 else 0.0
            ratios.append(ratio)
            above_one = above_one + 1 if ratio >= 1 else 0
            if above_one >= 3:
                raise ContractionError(ratio, iteration)
        distances.append(dist)
        states = updated
        if dist <= cfg.picard_tol:
            logger.debug("Picard converged in %d iterations (last distance %.3e)", iteration, dist)
            return PicardResult(Trajectory(grid, times, states), iteration, ratios, distances)

    raise ConvergenceError(
        f"Picard iteration did not reach tolerance {cfg.picard_tol:g} in "
        f"{cfg.picard_max_iter} iterations (last distance {distances[-1]:.3e})"
    )


def uniqueness_probe(
    u0: Field,
    f: Field,
    p: float,
    params: OperatorParams,
    T: float,
    cfg: SolverConfig,
    *,
    nodes: int = 64,
) -> float:
    """Largest pairwise sup distance between Picard limits from three different starts."""
    limits = [
        picard_small_time(u0, f, p, params, T, cfg, nodes=nodes, initial=start).trajectory
        for start in ("zero", "semigroup", "constant")
    ]
    return max(a.sup_distance(b) for a, b in combinations(limits, 2))


# ---------------------------------------------------------------------------
# Exponential Euler
# ---------------------------------------------------------------------------


def exponential_euler_step(
    u: Field, f: Field, p: float, params: OperatorParams, dt: float
) -> Field:
    """u_next = e^{-dt L} u + phi_1(dt L)(|u|^p + f).

    Raises NumericalOverflow when the step produces non-finite values.
    """
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        source = power_nonlinearity(u.samples, p) + f.samples
        if not np.all(np.isfinite(source)):
            raise NumericalOverflow(f"nonlinearity overflowed at dt={dt:g}")
        coeffs = (
            semigroup_multiplier(params, u.grid, dt) * u.spectral
            + phi1_multiplier(params, u.grid, dt) * forward(source)
        )
        nxt = Field.from_spectral(u.grid, coeffs, check=False)
    if not nxt.is_finite():
        raise NumericalOverflow(f"step produced non-finite values at dt={dt:g}")
    return nxt


def _forced_baseline(u0: Field, f: Field, params: OperatorParams, t: float) -> float:
    coeffs = (
        semigroup_multiplier(params, u0.grid, t) * u0.spectral
        + phi1_multiplier(params, u0.grid, t) * f.spectral
    )
    return Field.from_spectral(u0.grid, coeffs).lp_norm(np.inf)


def integrate(
    u0: Field, f: Field, p: float, params: OperatorParams, cfg: SolverConfig
) -> SolveOutcome:
    """Step to t_end, the blow-up threshold or the dt floor, then classify."""
    if p <= 1:
        raise DomainError(f"p must exceed 1, got {p}")
    u0.require_finite()
    f.require_finite()
    initial_linf = u0.lp_norm(np.inf)
    if initial_linf >= cfg.blowup_threshold:
        raise DomainError(
            f"blowup_threshold {cfg.blowup_threshold:g} must exceed the initial sup norm {initial_linf:g}"
        )

    t = 0.0
    u = u0
    series = [_norm_sample(0.0, u)]
    min_linf = initial_linf
    diagnostics: list[str] = []
    dt_floor_hit = False
    resolution_lost = False
    steps = 0

    while t < cfg.t_end:
        remaining = cfg.t_end - t
        if remaining <= cfg.dt_min * 1e-3:
            t = cfg.t_end
            break
        u_inf = float(np.abs(u.samples).max())
        with np.errstate(over="ignore"):
            s_inf = float(np.abs(power_nonlinearity(u.samples, p) + f.samples).max())
        growth_dt = cfg.growth_tol * max(u_inf, 1.0) / s_inf if s_inf > 0 else math.inf
        dt = min(cfg.dt_init, growth_dt)
        growth_limited = growth_dt < cfg.dt_init

        accepted = None
        while accepted is None:
            if dt < cfg.dt_min:
                dt_floor_hit = True
                break
            step_dt = min(dt, remaining)
            try:
                candidate = exponential_euler_step(u, f, p, params, step_dt)
            except NumericalOverflow:
                dt *= cfg.adapt_factor
                continue
            if candidate.lp_norm(np.inf) > (1.0 + 10.0 * cfg.growth_tol) * max(u_inf, 1.0):
                dt *= cfg.adapt_factor
                growth_limited = True
                continue
            accepted = (candidate, step_dt)
        if dt_floor_hit:
            diagnostics.append(f"time step fell below dt_min={cfg.dt_min:g} at t={t:.17g}")
            break

        u, step_dt = accepted
        t = cfg.t_end if step_dt == remaining else t + step_dt
        steps += 1
        sample = _norm_sample(t, u)
        series.append(sample)
        min_linf = min(min_linf, sample.linf)
        if sample.linf >= cfg.blowup_threshold:
            break

        if steps % cfg.check_every == 0:
            tail = u.spectral_tail_fraction()
            if tail > RESOLUTION_TAIL_TOL:
                runaway = growth_limited and sample.linf >= RUNAWAY_FACTOR * min_linf
                note = f"spectral tail {tail:.2e} above {RESOLUTION_TAIL_TOL:g} at t={t:.6g}"
                if runaway:
                    if not any(d.startswith("under-resolved") for d in diagnostics):
                        diagnostics.append("under-resolved during runaway growth: " + note)
                else:
                    diagnostics.append(note)
                    resolution_lost = True
                    break

    baseline = None
    if f.lp_norm(np.inf) > 0 and t >= cfg.t_end:
        baseline = _forced_baseline(u0, f, params, cfg.t_end)

    if resolution_lost:
        status, t_max = Status.INDETERMINATE, None
    else:
        status, t_max = classify_outcome(
            series, p, cfg, dt_floor_hit=dt_floor_hit, baseline_linf=baseline
        )
    t_star = series[-1].t if status is Status.BLOWUP else None
    logger.info(
        "integrate p=%g: %s after %d steps (t=%.6g, linf=%.4g)",
        p,
        status.value,
        steps,
        series[-1].t,
        series[-1].linf,
    )
    return SolveOutcome(
        status=status,
        t_star=t_star,
        t_max_estimate=t_max,
        series=series,
        dt_floor_hit=dt_floor_hit,
        baseline_linf=baseline,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def _fit_blowup_time(series: list[NormSample], p: float) -> Optional[float]:
    """Fit |u|_inf ~ kappa (T* - t)^{-1/(p-1)} over the last decade of growth."""
    last = series[-1].linf
    window = []
    for sample in reversed(series):
        if sample.linf < last / 10.0:
            break
        window.append(sample)
    if len(window) < MIN_FIT_SAMPLES:
        return None
    t = np.array([s.t for s in window])
    # linf^{-(p-1)} is linear in t under the model
    y = np.array([s.linf ** (1.0 - p) for s in window])
    if np.ptp(t) == 0:
        return None
    fit = linregress(t, y)
    if not fit.slope < 0:
        return None
    return float(t.mean() - y.mean() / fit.slope)


def _decay_trend(series: list[NormSample]) -> bool:
    tail = [s for s in series[len(series) // 2 :] if s.t > 0 and s.linf > 0]
    if len(tail) < MIN_FIT_SAMPLES:
        return False
    t = np.log([s.t for s in tail])
    y = np.log([s.linf for s in tail])
    if np.ptp(t) == 0:
        return False
    return bool(linregress(t, y).slope < 0)


def classify_outcome(
    series: list[NormSample],
    p: float,
    cfg: SolverConfig,
    *,
    dt_floor_hit: bool = False,
    baseline_linf: Optional[float] = None,
) -> tuple[Status, Optional[float]]:
    if not series:
        raise DomainError("cannot classify an empty series")
    last = series[-1]
    if last.linf >= cfg.blowup_threshold or dt_floor_hit:
        return Status.BLOWUP, _fit_blowup_time(series, p)

    finite = all(math.isfinite(v) for s in series for v in (s.l1, s.l2, s.linf, s.mass))
    if finite and last.t >= cfg.t_end * (1.0 - 1e-12):
        if last.linf < series[0].linf:
            return Status.GLOBAL, None
        if baseline_linf is not None and last.linf <= BASELINE_FACTOR * baseline_linf:
            return Status.GLOBAL, None
        if _decay_trend(series):
            return Status.GLOBAL, None
    return Status.INDETERMINATE, None
