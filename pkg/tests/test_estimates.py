import math

import numpy as np
import pytest

from app.capacity import cutoff_ramp
from app.errors import DomainError, FitError
from app.estimates import (
    CORDOBA_TOL,
    contractivity_check,
    cordoba_check,
    decay_fit,
    kernel_width,
    pointwise_inequality_suite,
    smoothing_constants,
    theory_slope,
    verify_suite,
    young_check,
)
from app.families import make_family
from app.field import Field, radius
from app.models import Grid, OperatorParams
from app.operator import apply_operator


@pytest.fixture(scope="module")
def long_grid() -> Grid:
    return Grid(d=1, n=32768, box_length=16384.0)


@pytest.fixture(scope="module")
def probe(long_grid) -> Field:
    return make_family("gaussian", {"amp": 1.0, "width": 1.0}, long_grid)


# ---------------------------------------------------------------------------
# Decay
# ---------------------------------------------------------------------------


def test_theory_slope():
    assert theory_slope(1, 0.5, 1.0, math.inf) == pytest.approx(-1.0)
    assert theory_slope(3, 0.5, 1.0, 2.0) == pytest.approx(-1.5)
    assert theory_slope(2, 0.25, 2.0, 2.0) == 0.0


def test_kernel_width():
    assert kernel_width(OperatorParams(a=0.0, b=1.0, s=0.5), 10.0, 1) == pytest.approx(10.0)
    assert kernel_width(OperatorParams(a=1.0, b=0.0, s=0.5), 8.0, 1) == pytest.approx(4.0)


def test_fractional_decay_slope(probe):
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    fit = decay_fit(params, 1.0, math.inf, probe, np.geomspace(10, 1000, 16))
    assert fit.theory_slope == pytest.approx(-1.0)
    assert fit.points == 16
    assert fit.rel_error <= 0.05


def test_mixed_operator_decays_at_the_nonlocal_rate(probe):
    params = OperatorParams(a=1.0, b=1.0, s=0.5)
    fit = decay_fit(params, 1.0, math.inf, probe, np.geomspace(100, 2000, 12))
    assert fit.fitted_slope == pytest.approx(-1.0, rel=0.1)


def test_mass_is_conserved_for_positive_probe(probe):
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    fit = decay_fit(params, 1.0, 1.0, probe, np.geomspace(1, 100, 8))
    assert fit.theory_slope == 0.0
    assert abs(fit.fitted_slope) < 1e-6


def test_times_outside_window_are_excluded():
    grid = Grid(d=1, n=256, box_length=64.0)
    probe = make_family("gaussian", {"width": 1.0}, grid)
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    with pytest.raises(FitError):
        decay_fit(params, 1.0, math.inf, probe, [1.0, 8.0, 20.0, 40.0])


def test_decay_rejects_bad_exponents(probe):
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    with pytest.raises(DomainError):
        decay_fit(params, 2.0, 1.0, probe, [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        decay_fit(params, 0.5, 1.0, probe, [1.0, 2.0, 3.0])


def test_smoothing_constants_are_comparable(long_grid):
    params = OperatorParams(a=0.0, b=1.0, s=0.5)
    probes = {
        "gaussian": make_family("gaussian", {"width": 1.0}, long_grid),
        "dipole": make_family("dipole", {"sep": 20.0, "width": 1.0}, long_grid),
        "ring": make_family("ring", {"radius": 10.0, "width": 1.0}, long_grid),
    }
    constants = smoothing_constants(params, 1.0, math.inf, probes, np.geomspace(10, 1000, 8))
    assert set(constants) == set(probes)
    assert all(c > 0 for c in constants.values())
    assert max(constants.values()) / min(constants.values()) <= 3.0
    assert constants["gaussian"] == pytest.approx(1 / math.pi, rel=0.05)


# ---------------------------------------------------------------------------
# Pointwise inequalities
# ---------------------------------------------------------------------------


@pytest.fixture
def cutoff_grid() -> Grid:
    return Grid(d=1, n=1024, box_length=64.0)


def test_cordoba_constant_base_is_exact(cutoff_grid):
    assert cordoba_check(Field.constant(cutoff_grid, 0.7), 0.5, 3.0) == pytest.approx(0.0, abs=1e-12)


def test_cordoba_linear_power_is_equality(cutoff_grid):
    base = Field(cutoff_grid, cutoff_ramp(radius(cutoff_grid) / 8.0))
    assert cordoba_check(base, 0.3, 1.0) == 0.0


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_cordoba_holds_for_powered_cutoff(cutoff_grid, s):
    base = Field(cutoff_grid, cutoff_ramp(radius(cutoff_grid) / 8.0))
    frac = OperatorParams(a=0.0, b=1.0, s=s)
    scale = apply_operator(Field(cutoff_grid, base.samples**4), frac).lp_norm(np.inf)
    assert cordoba_check(base, s, 4.0) <= CORDOBA_TOL * scale


def test_cordoba_rejects_negative_base(cutoff_grid):
    with pytest.raises(DomainError):
        cordoba_check(Field.constant(cutoff_grid, -1.0), 0.5, 2.0)
    with pytest.raises(DomainError):
        cordoba_check(Field.constant(cutoff_grid, 1.0), 0.5, 0.5)


def test_pointwise_suite_identical_fields(gaussian):
    report = pointwise_inequality_suite(gaussian, gaussian, 2.5)
    assert report.qwe_violation <= 0
    assert report.max_violation <= 1e-12


def test_pointwise_suite_unit_against_zero(grid1d):
    report = pointwise_inequality_suite(Field.constant(grid1d, 1.0), Field.zeros(grid1d), 2.0)
    assert report.qwe_violation == pytest.approx(-1.0)
    assert report.product_violation == pytest.approx(0.0, abs=1e-12)


def test_pointwise_suite_rejects_small_p(gaussian):
    with pytest.raises(DomainError):
        pointwise_inequality_suite(gaussian, gaussian, 1.0)


def test_young_and_contractivity(rng):
    assert young_check(rng, 20).passed
    result = contractivity_check(rng, 5)
    assert result.passed
    assert result.max_violation <= 1e-6


def test_verify_suite_passes_and_is_seeded():
    first = verify_suite(7, cases=5)
    second = verify_suite(7, cases=5)
    assert first.passed
    assert [c.name for c in first.checks] == ["cordoba", "qwe_product", "young", "contractivity"]
    assert [c.max_violation for c in first.checks] == [c.max_violation for c in second.checks]
