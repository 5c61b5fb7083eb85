"""Experiment orchestration: build data, run integrations and R-sweeps, write CSV."""

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import numpy as np
from pydantic import BaseModel

from app.capacity import (
    critical_case_report,
    fujita_report,
    instantaneous_blowup_check,
    nonexistence_report,
    scaling_slopes,
)
from app.config import settings
from app.errors import DomainError, OutputError
from app.estimates import decay_fit
from app.experiment import ExperimentConfig, run_id
from app.exponents import forcing_critical_exponent, fujita_exponent, weissler_exponent
from app.families import Family, make_family, normalize
from app.field import Field
from app.models import (
    DecayFit,
    FujitaTable,
    NonexistenceTable,
    RunRecord,
    RunSummary,
    ScalingFit,
    SolveOutcome,
    Status,
)
from app.solver import integrate

# Relative tolerance for "zero mass" and "small data" decisions
MASS_TOL = 1e-12
NORM_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


def prepare_data(cfg: ExperimentConfig, p: Optional[float]) -> tuple[Field, Field]:
    """Sample u0 and f; ``amp = auto`` rescales to the small-data budget.

    u0 is measured in L^{p_c^s}, f in L^k with k = p_c^s / p.  When both are
    auto each gets half of ``settings.small_data_norm``.
    """
    grid = cfg.grid
    ic, fc = cfg.initial_data, cfg.forcing
    u0 = make_family(ic.family.value, ic.parameters(), grid)
    f = make_family(fc.family.value, fc.parameters(), grid)
    if not (ic.auto or fc.auto):
        return u0, f
    if p is None:
        raise DomainError("amp = auto needs a value of p")

    budget = settings.small_data_norm
    if ic.auto and fc.auto and fc.family is not Family.ZERO:
        budget *= 0.5
    p_c_s = weissler_exponent(grid.d, cfg.operator.s, p)
    if ic.auto and ic.family is not Family.ZERO:
        if p_c_s < 1:
            raise DomainError(f"amp = auto needs p_c^s >= 1 (got {p_c_s:g}); p must exceed p_F")
        u0 = normalize(u0, p_c_s, budget)
    if fc.auto and fc.family is not Family.ZERO:
        k = p_c_s / p
        if k < 1:
            raise DomainError(f"forcing amp = auto needs k = p_c^s/p >= 1 (got {k:g})")
        f = normalize(f, k, budget)
    return u0, f


def _is_small(u0: Field, f: Field, d: int, s: float, p: float, forced: bool) -> bool:
    p_c_s = weissler_exponent(d, s, p)
    if p_c_s < 1:
        return False
    total = u0.lp_norm(p_c_s)
    if forced:
        k = p_c_s / p
        if k < 1:
            return False
        total += f.lp_norm(k)
    return total <= settings.small_data_norm * (1.0 + NORM_SLACK)


def expected_status(
    cfg: ExperimentConfig, p: float, u0: Field, f: Field
) -> tuple[Optional[Status], bool]:
    """(expected status or None when ungated, slow-regime flag)."""
    d, s = cfg.grid.d, cfg.operator.s
    forced = f.lp_norm(np.inf) > 0
    p_F = fujita_exponent(d, s)
    p_crit = forcing_critical_exponent(d, s) if d > 2 * s else None
    threshold = p_crit if forced else p_F
    slow = threshold is not None and abs(p - threshold) < settings.slow_regime_margin

    if cfg.experiment.expected is not None:
        return cfg.experiment.expected, slow
    if slow:
        return None, True

    mass = u0.integral()
    scale = u0.lp_norm(1)
    zero_mass = scale > 0 and abs(mass) <= MASS_TOL * max(scale, 1.0)
    if not forced:
        if p < p_F and (mass > 0 or zero_mass):
            return Status.BLOWUP, False
        if p > p_F and _is_small(u0, f, d, s, p, forced=False):
            return Status.GLOBAL, False
        return None, False
    if p_crit is None:
        return None, False
    if p < p_crit and f.integral() > 0:
        return Status.BLOWUP, False
    if p > p_crit and _is_small(u0, f, d, s, p, forced=True):
        return Status.GLOBAL, False
    return None, False


# ---------------------------------------------------------------------------
# Integrations
# ---------------------------------------------------------------------------


def simulate(cfg: ExperimentConfig, p: Optional[float] = None) -> tuple[RunRecord, SolveOutcome]:
    """One integration at ``p`` (default: the [problem] p)."""
    p = cfg.problem.p if p is None else p
    if p is None:
        raise DomainError("no value of p configured")
    u0, f = prepare_data(cfg, p)
    expected, slow = expected_status(cfg, p, u0, f)

    start = time.perf_counter()
    outcome = integrate(u0, f, p, cfg.operator, cfg.solver)
    wall = time.perf_counter() - start

    summary = RunSummary(
        p=p,
        status=outcome.status,
        t_star=outcome.t_star,
        t_max_estimate=outcome.t_max_estimate,
        final_linf=outcome.series[-1].linf if outcome.series else None,
        t_end=cfg.solver.t_end,
        expected=expected,
        slow_regime=slow,
        diagnostics=outcome.diagnostics,
    )
    record = RunRecord(run_id=run_id(cfg, p), config=cfg.snapshot(), outcome=summary, wall_time=wall)
    verdict = outcome.status.value
    if expected is not None:
        verdict += " (expected)" if expected is outcome.status else f" (UNEXPECTED, wanted {expected.value})"
    elif slow:
        verdict += " (slow regime, ungated)"
    print(f"[p={p:g}] {verdict} in {wall:.1f}s, final linf {summary.final_linf:.4g}")
    for note in outcome.diagnostics:
        print(f"[p={p:g}]   {note}")
    return record, outcome


def _worker_count(requested: Optional[int], jobs: int) -> int:
    n = settings.threads or requested or os.cpu_count() or 1
    return max(1, min(n, jobs))


def run_sweep(cfg: ExperimentConfig, threads: Optional[int] = None) -> list[RunRecord]:
    """One independent integration per swept p; records come back in submission order."""
    ps = cfg.p_values()
    if not ps:
        raise DomainError("sweep list is empty")
    workers = _worker_count(threads, len(ps))
    print(f"Sweeping p over {', '.join(f'{p:g}' for p in ps)} with {workers} worker(s).\n")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(simulate, cfg, p) for p in ps]
        records = [fut.result()[0] for fut in futures]
    return records


def exit_code(summaries: Iterable[RunSummary]) -> int:
    """3 if any run is Indeterminate, else 1 if any gated run is unexpected, else 0."""
    summaries = list(summaries)
    if any(s.status is Status.INDETERMINATE for s in summaries):
        return 3
    if any(s.expected is not None and s.expected is not s.status for s in summaries):
        return 1
    return 0


# ---------------------------------------------------------------------------
# R-sweeps and fits
# ---------------------------------------------------------------------------


def run_capacity(cfg: ExperimentConfig) -> ScalingFit:
    fit = scaling_slopes(
        cfg.problem.p, cfg.operator, cfg.experiment.R_list, d=cfg.grid.d, n=cfg.grid.n
    )
    print(
        f"slope I1/T: {fit.slope_I1:.4f} +- {fit.stderr_I1:.1e}, "
        f"slope I2/T: {fit.slope_I2:.4f} +- {fit.stderr_I2:.1e}, "
        f"expected {fit.expected:.4f}"
    )
    return fit


def run_nonexistence(cfg: ExperimentConfig) -> Union[NonexistenceTable, FujitaTable]:
    """The forced table, or the unforced one when the forcing family is zero."""
    p = cfg.problem.p
    u0, f = prepare_data(cfg, p)
    R_list = cfg.experiment.R_list
    if cfg.forcing.family is Family.ZERO:
        table = fujita_report(u0, p, cfg.operator, R_list)
    else:
        table = nonexistence_report(u0, f, p, cfg.operator, R_list)
    flag = "set" if table.contradiction_trend else "clear"
    print(f"exponent {table.exponent:.4f}, contradiction trend {flag}")
    return table


def run_critical(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Critical-case rows and the instantaneous blow-up check, both at sigma."""
    sigma = cfg.experiment.sigma
    u0, f = prepare_data(cfg, cfg.problem.p)
    rows = critical_case_report(u0, f, cfg.operator, sigma, cfg.experiment.R_list)
    check = instantaneous_blowup_check(f, sigma, cfg.experiment.R_list)
    print(f"growth functional at sigma={sigma:g}: criterion {'met' if check.criterion_met else 'not met'}")
    return [row.model_dump() | {"growth": g} for row, g in zip(rows, check.values)]


def run_decay(cfg: ExperimentConfig) -> DecayFit:
    exp = cfg.experiment
    if cfg.initial_data.auto:
        raise DomainError("the decay probe needs an explicit amplitude")
    probe, _ = prepare_data(cfg, cfg.problem.p)
    t_grid = np.geomspace(exp.t_lo, exp.t_hi, exp.t_points)
    fit = decay_fit(cfg.operator, exp.q, exp.r, probe, t_grid)
    print(
        f"decay q={fit.q:g} r={fit.r:g}: slope {fit.fitted_slope:.4f} vs {fit.theory_slope:.4f} "
        f"(rel. error {fit.rel_error:.2%}, window {fit.t_window[0]:g}..{fit.t_window[1]:g})"
    )
    return fit


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ";".join(_format(v) for v in value)
    return str(value)


def emit_csv(
    records: list[Union[BaseModel, dict[str, Any]]],
    path: Union[str, Path],
    columns: Optional[list[str]] = None,
) -> None:
    """Header plus one row per record: 17 significant digits, '\\n' line endings."""
    if not records:
        raise DomainError("emit_csv needs at least one record")
    rows = [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in records]
    columns = columns or list(rows[0])
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format(row.get(c)) for c in columns])
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e.strerror or e}") from e


SWEEP_COLUMNS = [
    "run_id",
    "p",
    "p_F",
    "p_crit",
    "status",
    "t_star",
    "t_max_estimate",
    "final_linf",
    "t_end",
    "expected",
    "slow_regime",
]


def sweep_rows(cfg: ExperimentConfig, records: list[RunRecord]) -> list[dict[str, Any]]:
    d, s = cfg.grid.d, cfg.operator.s
    p_crit = forcing_critical_exponent(d, s) if d > 2 * s else None
    rows = []
    for rec in records:
        out = rec.outcome
        rows.append(
            {
                "run_id": rec.run_id,
                "p": out.p,
                "p_F": fujita_exponent(d, s),
                "p_crit": p_crit,
                "status": out.status,
                "t_star": out.t_star,
                "t_max_estimate": out.t_max_estimate,
                "final_linf": out.final_linf,
                "t_end": out.t_end,
                "expected": out.expected,
                "slow_regime": out.slow_regime,
            }
        )
    return rows


def write_simulation(outcome: SolveOutcome, out_dir: Path) -> None:
    emit_csv(outcome.series, out_dir / "series.csv", ["t", "l1", "l2", "linf", "mass"])
    emit_csv([outcome], out_dir / "summary.csv", ["status", "t_star", "t_max_estimate"])


def output_dir(cfg: Optional[ExperimentConfig], override: Optional[str]) -> Path:
    if override:
        return Path(override)
    if cfg is not None and cfg.experiment.output:
        return Path(cfg.experiment.output)
    return Path(settings.output_dir)
