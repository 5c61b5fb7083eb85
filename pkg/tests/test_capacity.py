import math

import numpy as np
import pytest

from app.capacity import (
    build_test_function,
    capacity_integrals,
    capacity_sweep,
    critical_case_report,
    cutoff_ramp,
    fujita_report,
    growth_functional,
    instantaneous_blowup_check,
    nonexistence_report,
    quotient_integrand,
    scaling_slopes,
    sphere_area,
    uniform_bound_constant,
    weak_residual,
)
from app.errors import CutoffConstructionError, DomainError, FitError, RangeError
from app.field import Field, axis
from app.models import Grid, OperatorParams, SolverConfig
from app.solver import Trajectory, picard_small_time


def gaussian_field(grid: Grid, mass: float, width: float) -> Field:
    amp = mass / (math.sqrt(2 * math.pi) * width) ** grid.d
    return Field.from_function(grid, lambda *xs: amp * np.exp(-sum(x**2 for x in xs) / (2 * width**2)))


# ---------------------------------------------------------------------------
# Cutoffs
# ---------------------------------------------------------------------------


def test_ramp_plateaus_and_midpoint():
    assert cutoff_ramp(0.0) == 1.0
    assert cutoff_ramp(0.5) == 1.0
    assert cutoff_ramp(0.75) == pytest.approx(0.5)
    assert cutoff_ramp(1.0) == 0.0
    assert cutoff_ramp(3.0) == 0.0


def test_ramp_is_non_increasing():
    values = cutoff_ramp(np.linspace(0, 1.2, 2001))
    assert np.all(np.diff(values) <= 0)


@pytest.mark.parametrize("p,l", [(2.0, 4.0), (3.0, 3.0), (1.5, 6.0)])
def test_cutoff_power(p, l):
    assert build_test_function(1.0, 1.0, p).l == l


def test_cutoff_plateaus():
    pair = build_test_function(T=4.0, R=10.0, p=2.0)
    assert np.all(pair.eta(np.array([0.0, 1.0, 2.0])) == 1.0)
    assert pair.eta(4.0) == 0.0
    assert np.all(pair.phi(np.array([0.0, 3.0, 5.0])) == 1.0)
    assert np.all(pair.phi(np.array([10.0, 12.0])) == 0.0)
    assert pair(1.0, 2.0) == 1.0


def test_eta_prime_matches_finite_difference():
    pair = build_test_function(T=2.0, R=1.0, p=2.0)
    t = np.linspace(1.05, 1.95, 19)
    h = 1e-6
    fd = (pair.eta(t + h) - pair.eta(t - h)) / (2 * h)
    np.testing.assert_allclose(pair.eta_prime(t), fd, rtol=1e-4, atol=1e-9)
    assert np.all(pair.eta_prime(np.array([0.5, 2.0, 3.0])) == 0.0)


def test_build_test_function_rejects_p_at_most_one():
    with pytest.raises(DomainError):
        build_test_function(1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Capacity integrals
# ---------------------------------------------------------------------------


def test_quotient_zero_over_zero_is_zero():
    out = quotient_integrand(np.array([-np.inf, 0.0]), np.array([-np.inf, 0.0]), 2.0)
    assert out.tolist() == [0.0, 1.0]


def test_quotient_rejects_mass_outside_support():
    with pytest.raises(CutoffConstructionError):
        quotient_integrand(np.array([-3.0]), np.array([-np.inf]), 2.0)


def test_i1_doubles_with_r_in_one_dimension(fractional):
    grid = Grid(d=1, n=1024, box_length=64.0)
    small = capacity_integrals(build_test_function(1.0, 4.0, 2.0), fractional, grid)
    large = capacity_integrals(build_test_function(1.0, 8.0, 2.0), fractional, grid)
    assert large.I1 / small.I1 == pytest.approx(2.0, rel=0.02)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_i1_time_scaling(fractional, p):
    grid = Grid(d=1, n=256, box_length=64.0)
    short = capacity_integrals(build_test_function(1.0, 8.0, p), fractional, grid)
    long = capacity_integrals(build_test_function(2.0, 8.0, p), fractional, grid)
    assert long.I1 / short.I1 == pytest.approx(2 ** (-1 / (p - 1)), rel=0.02)


def test_integrals_finite_and_nonnegative(mixed):
    grid = Grid(d=2, n=128, box_length=32.0)
    report = capacity_integrals(build_test_function(2.0, 6.0, 1.8), mixed, grid)
    assert report.I1 > 0 and report.I2 > 0
    assert math.isfinite(report.I1) and math.isfinite(report.I2)


def test_exact_form_agrees_with_majorant_for_local_operator():
    grid = Grid(d=1, n=1024, box_length=64.0)
    pair = build_test_function(1.0, 8.0, 2.0)
    local = OperatorParams(a=1.0, b=0.0, s=0.5)
    majorant = capacity_integrals(pair, local, grid)
    exact = capacity_integrals(pair, local, grid, form="exact")
    assert exact.I2 == pytest.approx(majorant.I2, rel=1e-3)


def test_exact_form_is_not_integrable_with_nonlocal_part(mixed):
    grid = Grid(d=1, n=512, box_length=64.0)
    with pytest.raises(CutoffConstructionError):
        capacity_integrals(build_test_function(1.0, 8.0, 2.0), mixed, grid, form="exact")


def test_ball_must_fit_in_box(mixed):
    grid = Grid(d=1, n=64, box_length=16.0)
    with pytest.raises(RangeError):
        capacity_integrals(build_test_function(1.0, 8.0, 2.0), mixed, grid)


@pytest.mark.parametrize(
    "s,p,expected",
    [
        (0.5, 1.5, -2.0),
        # 1 - 2(0.3)(2)/(2 - 1)
        (0.3, 2.0, -0.2),
    ],
)
def test_scaling_slopes_match_exponent(s, p, expected):
    params = OperatorParams(a=0.0, b=1.0, s=s)
    fit = scaling_slopes(p, params, [16, 32, 64, 128, 256], d=1)
    assert fit.expected == pytest.approx(expected)
    assert fit.slope_I1 == pytest.approx(expected, rel=0.05)
    assert fit.slope_I2 == pytest.approx(expected, rel=0.05)


def test_scaling_slopes_critical_case_is_flat():
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    fit = scaling_slopes(2.0, params, [4, 8, 16, 32], d=2, n=128)
    assert fit.expected == pytest.approx(0.0, abs=1e-15)
    assert fit.slope_I1 == pytest.approx(0.0, abs=0.05)
    assert fit.slope_I2 == pytest.approx(0.0, abs=0.05)


def test_capacity_sweep_fills_local_slopes():
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    reports = capacity_sweep(2.0, params, [8, 4, 16], d=1, n=128)
    assert [r.R for r in reports] == [4, 8, 16]
    assert reports[0].slope_I1_R is None
    # I1 ~ R^d T^{-1/(p-1)} with T = R^{2s}: slope in R is d - 2s/(p-1) = 0
    assert reports[1].slope_I1_R == pytest.approx(0.0, abs=1e-6)
    assert reports[2].slope_I2_R is not None


def test_scaling_slopes_need_three_radii(fractional):
    with pytest.raises(FitError):
        scaling_slopes(2.0, fractional, [4, 8], d=1, n=64)


def test_uniform_bound_constant_is_stable_in_r():
    grid = Grid(d=1, n=2048, box_length=128.0)
    constants = [uniform_bound_constant(R, 0.5, grid) for R in (4.0, 8.0, 16.0)]
    assert max(constants) / min(constants) <= 1.1


# ---------------------------------------------------------------------------
# Nonexistence tables
# ---------------------------------------------------------------------------


@pytest.fixture
def wide_grid() -> Grid:
    return Grid(d=1, n=2048, box_length=256.0)


RADII = [2, 4, 8, 16, 32, 64]


def test_forced_table_shows_contradiction_below_p_crit(wide_grid):
    params = OperatorParams(a=1.0, b=1.0, s=0.4)
    f = gaussian_field(wide_grid, 1.0, 1.0)
    table = nonexistence_report(Field.zeros(wide_grid), f, 1.5, params, RADII)
    assert table.rows[-1].forcing_term == pytest.approx(1.0, rel=1e-6)
    assert table.exponent < 0
    # R^{d - 2sp/(p-1)} = R^{-1.4} drops by 32^{1.4} across the table
    assert table.rows[0].capacity_term / table.rows[-1].capacity_term >= 10
    assert table.contradiction_trend


def test_unforced_table_has_no_contradiction(wide_grid):
    params = OperatorParams(a=1.0, b=1.0, s=0.4)
    u0 = gaussian_field(wide_grid, 1.0, 1.0)
    table = nonexistence_report(u0, Field.zeros(wide_grid), 1.5, params, RADII)
    assert all(r.forcing_term == 0 for r in table.rows)
    initial = [r.initial_term for r in table.rows]
    assert initial[-1] == pytest.approx(64 ** (-0.8), rel=1e-6)
    assert initial[0] / initial[-1] >= 10
    assert not table.contradiction_trend


def test_forced_table_above_p_crit_diverges(wide_grid):
    params = OperatorParams(a=1.0, b=1.0, s=0.4)
    f = gaussian_field(wide_grid, 1.0, 1.0)
    table = nonexistence_report(Field.zeros(wide_grid), f, 6.0, params, RADII)
    assert table.exponent > 0
    assert table.rows[-1].capacity_term > table.rows[0].capacity_term
    assert not table.contradiction_trend


def test_radius_outside_box_is_a_range_error(wide_grid, mixed):
    f = gaussian_field(wide_grid, 1.0, 1.0)
    with pytest.raises(RangeError):
        nonexistence_report(Field.zeros(wide_grid), f, 1.5, mixed, [8, 200])


def test_fujita_table_below_p_f(wide_grid):
    params = OperatorParams(a=1.0, b=1.0, s=0.5)
    u0 = gaussian_field(wide_grid, 0.5, 1.0)
    table = fujita_report(u0, 1.5, params, RADII)
    assert table.exponent == pytest.approx(1 - 2 * 0.5 / 0.5)
    assert table.rows[-1].initial_term == pytest.approx(0.5, rel=1e-6)
    assert table.contradiction_trend
    above = fujita_report(u0, 3.0, params, RADII)
    assert not above.contradiction_trend


def test_critical_case_rows(wide_grid):
    params = OperatorParams(a=1.0, b=1.0, s=0.4)
    f = gaussian_field(wide_grid, 1.0, 1.0)
    rows = critical_case_report(Field.zeros(wide_grid), f, params, 0.5, RADII)
    assert rows[-1].constant_term == pytest.approx(64**-0.5)
    assert rows[-1].forcing_term == pytest.approx(64**-0.5, rel=1e-6)
    with pytest.raises(DomainError):
        critical_case_report(Field.zeros(wide_grid), f, params, 0.0, RADII)


# ---------------------------------------------------------------------------
# Growth functional
# ---------------------------------------------------------------------------


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("R", [1.0, 7.0, 100.0])
def test_growth_functional_closed_forms(R):
    one = lambda r: np.ones_like(r)  # noqa: E731
    assert growth_functional(one, 1.0, R, d=1) == pytest.approx(2.0, rel=1e-10)
    assert growth_functional(one, 2.0, R, d=1) == pytest.approx(2.0 / R, rel=1e-10)
    assert growth_functional(lambda r: r, 2.0, R, d=1) == pytest.approx(1.0, rel=1e-10)


def test_growth_functional_on_a_grid(grid1d):
    value = growth_functional(Field.constant(grid1d, 1.0), 1.0, 10.0)
    assert value == pytest.approx(2.0, rel=0.02)


def test_growth_functional_needs_dimension_for_profiles():
    with pytest.raises(DomainError):
        growth_functional(lambda r: r, 1.0, 1.0)


def test_instantaneous_blowup_criterion():
    radii = [2.0**k for k in range(1, 9)]
    met = instantaneous_blowup_check(lambda r: r, 2.0, radii, d=1)
    assert met.criterion_met
    assert met.values == pytest.approx([1.0] * len(radii))
    decaying = instantaneous_blowup_check(lambda r: np.ones_like(r), 2.0, radii, d=1)
    assert not decaying.criterion_met
    # sigma must exceed d
    assert not instantaneous_blowup_check(lambda r: r, 1.0, radii, d=1).criterion_met


# ---------------------------------------------------------------------------
# Weak residual
# ---------------------------------------------------------------------------


def test_weak_residual_of_zero_solution_is_zero(grid1d, mixed):
    times = np.linspace(0.0, 1.0, 6)
    traj = Trajectory(grid1d, times, np.zeros((6, grid1d.n)))
    zero = Field.zeros(grid1d)
    pair = build_test_function(1.0, 10.0, 2.0)
    assert weak_residual(traj, pair, zero, zero, 2.0, mixed) == 0.0


def test_weak_residual_requires_full_horizon(grid1d, mixed):
    times = np.linspace(0.0, 0.5, 6)
    traj = Trajectory(grid1d, times, np.zeros((6, grid1d.n)))
    zero = Field.zeros(grid1d)
    with pytest.raises(RangeError):
        weak_residual(traj, build_test_function(1.0, 10.0, 2.0), zero, zero, 2.0, mixed)


def test_weak_residual_shrinks_under_refinement():
    params = OperatorParams(a=1.0, b=1.0, s=0.5)
    cfg = SolverConfig(picard_tol=1e-13)
    T, p = 0.3, 2.0
    pair = build_test_function(T, 15.0, p)
    residuals = []
    for nodes, n in ((6, 32), (12, 64), (24, 128)):
        grid = Grid(d=1, n=n, box_length=40.0)
        u0 = Field.from_function(grid, lambda x: 0.5 * np.exp(-(x**2) / 8.0))
        f = Field.zeros(grid)
        traj = picard_small_time(u0, f, p, params, T, cfg, nodes=nodes, quadrature="cubic").trajectory
        residuals.append(weak_residual(traj, pair, f, u0, p, params))
    assert residuals[0] / residuals[1] >= 4
    assert residuals[1] / residuals[2] >= 4


def test_phi_field_plateau(grid1d):
    pair = build_test_function(1.0, 8.0, 2.0)
    phi = pair.phi_field(grid1d).samples
    assert np.all(phi[np.abs(axis(grid1d)) <= 4.0] == 1.0)
