import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.errors import DomainError, InvalidFieldError, UnsupportedDimensionError
from app.field import Field, axis
from app.models import Grid, OperatorParams
from app.operator import (
    apply_operator,
    apply_semigroup,
    frac_constant,
    frac_laplacian_pv_1d,
    frac_laplacian_pv_profile,
    heat_kernel,
    phi1,
    phi1_multiplier,
    symbol,
)


def test_symbol_values():
    assert symbol([0.0], OperatorParams(a=1, b=1, s=0.5)) == 0.0
    assert symbol([1.0], OperatorParams(a=1, b=1, s=0.5)) == pytest.approx(2.0)
    assert symbol([2.0], OperatorParams(a=2, b=3, s=0.5)) == pytest.approx(14.0)
    assert symbol([0.6, 0.8], OperatorParams(a=1, b=1, s=0.5)) == pytest.approx(2.0)


@pytest.mark.parametrize("s", [0.0, 1.0, 1.2, -0.1])
def test_operator_params_reject_s_outside_open_unit_interval(s):
    with pytest.raises(ValidationError, match=r"s must lie in \(0,1\)"):
        OperatorParams(a=1, b=1, s=s)


def test_operator_params_reject_degenerate_operator():
    with pytest.raises(ValidationError, match="a \\+ b must be positive"):
        OperatorParams(a=0, b=0, s=0.5)


def test_phi1_limits():
    assert phi1(0.0, 0.3) == 0.3
    assert phi1(1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)
    assert phi1(2.0, 1e-9) / 1e-9 == pytest.approx(1.0, rel=1e-8)


def test_phi1_multiplier_entries_in_zero_dt(grid1d, mixed):
    m = phi1_multiplier(mixed, grid1d, 0.1)
    assert m.flat[0] == 0.1
    assert np.all(m > 0) and np.all(m <= 0.1)
    with pytest.raises(DomainError):
        phi1_multiplier(mixed, grid1d, 0.0)


def test_operator_annihilates_constants(grid1d, mixed):
    out = apply_operator(Field.constant(grid1d, 3.0), mixed)
    assert np.max(np.abs(out.samples)) <= 1e-12


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_cosine_is_an_eigenfunction(grid1d, s):
    k = 2 * math.pi * 5 / grid1d.box_length
    u = Field.from_function(grid1d, lambda x: np.cos(k * x))
    out = apply_operator(u, OperatorParams(a=0, b=1, s=s))
    np.testing.assert_allclose(out.samples, k ** (2 * s) * u.samples, atol=1e-12)


def test_local_operator_matches_finite_differences():
    grid = Grid(d=1, n=512, box_length=64.0)
    u = Field.from_function(grid, lambda x: np.exp(-(x**2) / 8.0))
    out = apply_operator(u, OperatorParams(a=1, b=0, s=0.5)).samples
    h = grid.h
    fd = -(np.roll(u.samples, -1) - 2 * u.samples + np.roll(u.samples, 1)) / h**2
    # O(h^2) with the fourth derivative of the bump bounded by ~0.2
    assert np.max(np.abs(out - fd)) <= 0.05 * h**2


def test_operator_rejects_non_finite_field(grid1d, mixed):
    bad = Field(grid1d, np.full(grid1d.n, np.inf), check=False)
    with pytest.raises(InvalidFieldError):
        apply_operator(bad, mixed)


def test_semigroup_at_zero_is_identity(gaussian, mixed):
    out = apply_semigroup(gaussian, mixed, 0.0)
    assert np.max(np.abs(out.samples - gaussian.samples)) <= 1e-14


def test_semigroup_rejects_negative_time(gaussian, mixed):
    with pytest.raises(DomainError):
        apply_semigroup(gaussian, mixed, -1.0)


def test_semigroup_preserves_mean_and_contracts(gaussian, mixed):
    out = apply_semigroup(gaussian, mixed, 3.0)
    assert out.integral() == pytest.approx(gaussian.integral(), rel=1e-12)
    assert out.lp_norm(np.inf) <= gaussian.lp_norm(np.inf)
    assert out.lp_norm(1) == pytest.approx(gaussian.lp_norm(1), rel=1e-10)


def test_semigroup_property(gaussian, mixed):
    two_steps = apply_semigroup(apply_semigroup(gaussian, mixed, 0.7), mixed, 1.8)
    one_step = apply_semigroup(gaussian, mixed, 2.5)
    assert np.max(np.abs(two_steps.samples - one_step.samples)) <= 1e-10 * one_step.lp_norm(np.inf)


def test_heat_flow_of_gaussian_adds_variance():
    grid = Grid(d=1, n=1024, box_length=128.0)
    var0, t = 2.0, 1.5
    u = Field.from_function(grid, lambda x: np.exp(-(x**2) / (2 * var0)) / math.sqrt(2 * math.pi * var0))
    out = apply_semigroup(u, OperatorParams(a=1, b=0, s=0.5), t)
    var = var0 + 2 * t
    x = axis(grid)
    exact = np.exp(-(x**2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    assert np.max(np.abs(out.samples - exact)) <= 1e-12


def test_gaussian_heat_kernel():
    grid = Grid(d=1, n=1024, box_length=100.0)
    t = 2.0
    x = axis(grid)
    exact = np.exp(-(x**2) / (4 * t)) / math.sqrt(4 * math.pi * t)
    kernel = heat_kernel(grid, OperatorParams(a=1, b=0, s=0.5), t)
    assert np.max(np.abs(kernel.samples - exact)) / exact.max() <= 1e-8
    assert kernel.integral() == pytest.approx(1.0, abs=1e-10)


def test_poisson_kernel():
    grid = Grid(d=1, n=8192, box_length=1024.0)
    t, L = 1.0, grid.box_length
    x = axis(grid)
    kernel = heat_kernel(grid, OperatorParams(a=0, b=1, s=0.5), t).samples
    # Poisson kernel t / (pi (t^2 + x^2)) summed over the periodic images
    phase = 2 * math.pi / L
    poisson = np.sinh(phase * t) / (np.cosh(phase * t) - np.cos(phase * x)) / L
    window = np.abs(x) <= L / 4
    rel = np.abs(kernel[window] - poisson[window]) / poisson[window]
    assert rel.max() <= 1e-4


def test_heat_kernel_is_even(grid1d, mixed):
    k = heat_kernel(grid1d, mixed, 0.5).samples
    n = grid1d.n
    assert np.array_equal(k[1:], k[1:][::-1])
    assert k[n // 2] == k.max()


def test_heat_kernel_rejects_non_positive_time(grid1d, mixed):
    with pytest.raises(DomainError):
        heat_kernel(grid1d, mixed, 0.0)


def test_frac_constant_closed_forms():
    assert frac_constant(1, 0.5).value == pytest.approx(1 / math.pi, rel=1e-14)
    # s * 4^s * Gamma(d/2 + s) / (pi^{d/2} Gamma(1 - s))
    d, s = 3, 0.3
    expected = s * 4**s * math.gamma(d / 2 + s) / (math.pi ** (d / 2) * math.gamma(1 - s))
    assert frac_constant(d, s).value == pytest.approx(expected, rel=1e-13)
    with pytest.raises(DomainError):
        frac_constant(1, 1.0)


def test_pv_oracle_on_constant_is_zero(grid1d):
    assert frac_laplacian_pv_1d(Field.constant(grid1d, 2.0), 0.5, 10) == pytest.approx(0.0, abs=1e-10)


def test_pv_oracle_positive_at_gaussian_peak(grid1d, gaussian):
    assert frac_laplacian_pv_1d(gaussian, 0.4, grid1d.n // 2) > 0


def test_pv_oracle_needs_one_dimension():
    grid = Grid(d=2, n=16, box_length=8.0)
    with pytest.raises(UnsupportedDimensionError):
        frac_laplacian_pv_1d(Field.zeros(grid), 0.5, 0)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_pv_oracle_matches_cosine_symbol(s):
    grid = Grid(d=1, n=256, box_length=64.0)
    k = 2 * math.pi * 4 / grid.box_length
    u = Field.from_function(grid, lambda x: np.cos(k * x))
    pv = frac_laplacian_pv_profile(u, s)
    expected = k ** (2 * s) * u.samples
    assert np.max(np.abs(pv - expected)) / np.max(np.abs(expected)) <= 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_pv_oracle_matches_spectral_operator(s):
    grid = Grid(d=1, n=1024, box_length=200.0)
    u = Field.from_function(grid, lambda x: np.exp(-(x**2) / 50.0))
    spectral = apply_operator(u, OperatorParams(a=0, b=1, s=s)).samples
    pv = frac_laplacian_pv_profile(u, s)
    interior = np.abs(axis(grid)) <= grid.box_length / 4
    err = np.max(np.abs(pv[interior] - spectral[interior])) / np.max(np.abs(spectral))
    assert err <= 1e-3
