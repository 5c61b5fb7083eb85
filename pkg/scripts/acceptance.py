"""Run the acceptance checks: kernel and operator oracles, the ODE blow-up
oracle, the decay slope, the Fujita dichotomy sweeps and the zero-mass and
forced sweeps.

    uv run python -m scripts.acceptance [--quick]

``--quick`` skips the sweeps (several minutes together).
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from app.experiment import load_config
from app.field import Field, coordinates
from app.models import Grid, Mode, OperatorParams, SolverConfig, Status
from app.operator import apply_operator, frac_laplacian_pv_profile, heat_kernel
from app.pipeline import run_decay, run_sweep
from app.solver import integrate

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def check_gaussian_kernel() -> bool:
    grid = Grid(d=1, n=1024, box_length=100.0)
    params = OperatorParams(a=1.0, b=0.0, s=0.5)
    t = 2.0
    (x,) = coordinates(grid)
    exact = np.exp(-(x**2) / (4 * t)) / np.sqrt(4 * np.pi * t)
    kernel = heat_kernel(grid, params, t).samples
    err = float(np.abs(kernel - exact).max() / exact.max())
    print(f"[kernel] b=0 relative sup error {err:.2e}")
    return err <= 1e-8


def check_poisson_kernel() -> bool:
    grid = Grid(d=1, n=8192, box_length=1024.0)
    t, L = 1.0, grid.box_length
    (x,) = coordinates(grid)
    # Sum of the Poisson kernel t / (pi (t^2 + x^2)) over the periodic images
    phase = 2 * np.pi / L
    exact = np.sinh(phase * t) / (np.cosh(phase * t) - np.cos(phase * x)) / L
    kernel = heat_kernel(grid, OperatorParams(a=0.0, b=1.0, s=0.5), t).samples
    window = np.abs(x) <= L / 4
    err = float((np.abs(kernel - exact)[window] / exact[window]).max())
    print(f"[poisson] a=0, s=1/2 relative error on |x| <= L/4: {err:.2e}")
    return err <= 1e-4


def check_fractional_operator() -> bool:
    grid = Grid(d=1, n=1024, box_length=200.0)
    u = Field.from_function(grid, lambda x: np.exp(-(x**2) / (2 * 25.0)))
    ok = True
    for s in (0.25, 0.5, 0.75):
        spectral = apply_operator(u, OperatorParams(a=0.0, b=1.0, s=s)).samples
        pv = frac_laplacian_pv_profile(u, s)
        err = float(np.abs(pv - spectral).max() / np.abs(spectral).max())
        print(f"[pv] s={s:g}: relative error {err:.2e}")
        ok &= err <= 1e-3
    return ok


def check_ode_blowup() -> bool:
    grid = Grid(d=1, n=64, box_length=10.0)
    params = OperatorParams(a=1.0, b=1.0, s=0.5)
    outcome = integrate(
        Field.constant(grid, 1.0), Field.zeros(grid), 2.0, params, SolverConfig(t_end=10.0)
    )
    print(
        f"[ode] status {outcome.status.value}, t_star {outcome.t_star}, "
        f"t_max_estimate {outcome.t_max_estimate}"
    )
    return (
        outcome.status is Status.BLOWUP
        and outcome.t_star is not None
        and 0.98 <= outcome.t_star <= 1.02
        and outcome.t_max_estimate is not None
        and abs(outcome.t_max_estimate - 1.0) <= 0.05
    )


def check_decay() -> bool:
    fit = run_decay(load_config(CONFIGS / "decay.conf", Mode.DECAY))
    return fit.rel_error <= 0.10


def _sweeps_match(cases: tuple[tuple[str, Status], ...]) -> bool:
    ok = True
    for name, wanted in cases:
        for rec in run_sweep(load_config(CONFIGS / name, Mode.SWEEP)):
            status = rec.outcome.status
            print(f"  {name} p={rec.outcome.p:g}: {status.value} (want {wanted.value})")
            ok &= status is wanted
    return ok


def check_dichotomy() -> bool:
    return _sweeps_match((("sweep_blowup.conf", Status.BLOWUP), ("sweep_global.conf", Status.GLOBAL)))


def check_zero_mass() -> bool:
    return _sweeps_match((("dipole.conf", Status.BLOWUP),))


def check_forcing() -> bool:
    return _sweeps_match((("forced_blowup.conf", Status.BLOWUP), ("forced_global.conf", Status.GLOBAL)))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="skip the sweeps")
    args = parser.parse_args()

    checks = [
        ("kernel", check_gaussian_kernel),
        ("poisson", check_poisson_kernel),
        ("pv", check_fractional_operator),
        ("ode", check_ode_blowup),
        ("decay", check_decay),
    ]
    if not args.quick:
        checks += [
            ("dichotomy", check_dichotomy),
            ("zero-mass", check_zero_mass),
            ("forcing", check_forcing),
        ]

    failed = []
    for tag, check in checks:
        start = time.perf_counter()
        passed = check()
        print(f"[{tag}] {'ok' if passed else 'FAILED'} ({time.perf_counter() - start:.1f}s)")
        if not passed:
            failed.append(tag)

    print(f"\nDone. {len(checks) - len(failed)}/{len(checks)} checks passed.")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
