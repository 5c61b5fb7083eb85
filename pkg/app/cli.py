"""fujita-lab command line.

    fujita-lab <subcommand> [--config FILE] [--out DIR] [--threads N]

Exit codes: 0 success or expected classifications, 1 unexpected
classification (or failed verification), 2 configuration or domain error,
3 indeterminate result.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from app.config import settings
from app.errors import ConfigError, FujitaLabError
from app.estimates import verify_suite
from app.experiment import ExperimentConfig, load_config
from app.exponents import (
    exponent_report,
    forcing_critical_exponent,
    fujita_exponent,
    time_integral_bounds,
)
from app.models import Mode, NonexistenceTable
from app.pipeline import (
    SWEEP_COLUMNS,
    emit_csv,
    exit_code,
    output_dir,
    run_capacity,
    run_critical,
    run_decay,
    run_nonexistence,
    run_sweep,
    simulate,
    sweep_rows,
    write_simulation,
)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _print_aligned(pairs: list[tuple[str, object]]) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        shown = "-" if value is None else (f"{value:.12g}" if isinstance(value, float) else value)
        print(f"  {key:<{width}}  {shown}")


def cmd_exponents(args: argparse.Namespace) -> int:
    d, s, p = args.d, args.s, args.p
    if args.config:
        cfg = load_config(args.config, Mode.EXPONENTS)
        d = d if d is not None else cfg.grid.d
        s = s if s is not None else cfg.operator.s
        p = p if p is not None else cfg.problem.p
    if d is None or s is None:
        raise ConfigError([(0, "exponents needs d and s (flags or a config)")])

    if p is None:
        row = {
            "d": d,
            "s": s,
            "p_F": fujita_exponent(d, s),
            "p_crit": forcing_critical_exponent(d, s) if d > 2 * s else None,
        }
        print(f"Exponents for d={d}, s={s:g}")
        _print_aligned(list(row.items()))
    else:
        report = exponent_report(d, s, p)
        row = report.model_dump()
        print(f"Exponents for d={d}, s={s:g}, p={p:g}")
        _print_aligned(list(row.items()))
        if report.q is not None:
            print("Duhamel time integrals")
            _print_aligned(list(time_integral_bounds(d, s, p).model_dump().items()))
    out = output_dir(None, args.out)
    emit_csv([row], out / "exponents.csv")
    return EXIT_OK


def _config(args: argparse.Namespace, mode: Mode) -> ExperimentConfig:
    if not args.config:
        raise ConfigError([(0, f"{mode.value} needs --config FILE")])
    return load_config(args.config, mode)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config(args, Mode.SIMULATE)
    record, outcome = simulate(cfg)
    out = output_dir(cfg, args.out)
    write_simulation(outcome, out)
    print(f"run {record.run_id}: {outcome.status.value}; wrote {out / 'series.csv'}")
    return exit_code([record.outcome])


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args, Mode.SWEEP)
    records = run_sweep(cfg, threads=args.threads)
    out = output_dir(cfg, args.out)
    emit_csv(sweep_rows(cfg, records), out / "sweep.csv", SWEEP_COLUMNS)

    print(f"\n{'=' * 60}")
    for rec in records:
        o = rec.outcome
        expected = o.expected.value if o.expected else ("slow" if o.slow_regime else "-")
        t_star = "-" if o.t_star is None else f"{o.t_star:.6g}"
        print(f"  p={o.p:<6g} {o.status.value:<14} expected {expected:<14} t_star {t_star}")
    code = exit_code(r.outcome for r in records)
    print(f"Done. {len(records)} runs, exit code {code}; wrote {out / 'sweep.csv'}")
    return code


def cmd_capacity(args: argparse.Namespace) -> int:
    cfg = _config(args, Mode.CAPACITY)
    fit = run_capacity(cfg)
    out = output_dir(cfg, args.out)
    emit_csv(
        fit.reports,
        out / "capacity.csv",
        ["R", "T", "I1", "I2", "slope_I1_R", "slope_I1_T", "slope_I2_R"],
    )
    return EXIT_OK


def cmd_nonexistence(args: argparse.Namespace) -> int:
    cfg = _config(args, Mode.NONEXISTENCE)
    table = run_nonexistence(cfg)
    out = output_dir(cfg, args.out)
    emit_csv(table.rows, out / "nonexistence.csv")
    for row in table.rows:
        print("  " + "  ".join(f"{k}={v:.6g}" for k, v in row.model_dump().items()))
    if cfg.experiment.sigma is not None and isinstance(table, NonexistenceTable):
        emit_csv(run_critical(cfg), out / "critical.csv")
    return EXIT_OK


def cmd_decay(args: argparse.Namespace) -> int:
    cfg = _config(args, Mode.DECAY)
    fit = run_decay(cfg)
    out = output_dir(cfg, args.out)
    emit_csv([fit], out / "decay.csv")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    report = verify_suite(args.seed, cases=args.cases)
    for c in report.checks:
        mark = "ok" if c.passed else "FAILED"
        print(f"  {c.name:<14} {c.cases:>4} cases  max violation {c.max_violation:.3e}  {mark}")
    out = output_dir(None, args.out)
    emit_csv(report.checks, out / "verify.csv")
    return EXIT_OK if report.passed else EXIT_UNEXPECTED


COMMANDS = {
    "exponents": cmd_exponents,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "capacity": cmd_capacity,
    "nonexistence": cmd_nonexistence,
    "decay": cmd_decay,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fujita-lab", description="Spectral lab for u_t + L_{a,b} u = |u|^p + f"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, help="experiment config file")
        cmd.add_argument("--out", help=f"output directory (default {settings.output_dir})")
        cmd.add_argument("--threads", type=int, help="sweep workers (FUJITA_LAB_THREADS wins)")
        if name == "exponents":
            cmd.add_argument("--d", type=int)
            cmd.add_argument("--s", type=float)
            cmd.add_argument("--p", type=float)
        if name == "verify":
            cmd.add_argument("--seed", type=int, default=0)
            cmd.add_argument("--cases", type=int, default=100)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FujitaLabError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
